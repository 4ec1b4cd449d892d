#include "vchat/error.hpp"

namespace vchat {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::OutOfRange: return "out_of_range";
        case ErrorCode::AdapterUnavailable: return "adapter_unavailable";
        case ErrorCode::MalformedResponse: return "malformed_response";
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::Environment: return "environment_error";
        case ErrorCode::Subprocess: return "subprocess_error";
        case ErrorCode::AmbiguousHeader: return "ambiguous_header";
        case ErrorCode::BudgetTooSmall: return "budget_too_small";
        case ErrorCode::Binding: return "binding_error";
        case ErrorCode::Serialization: return "serialization_error";
        case ErrorCode::Overflow: return "context_overflow";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::State: return "state_error";
        case ErrorCode::Forge: return "forge_error";
        case ErrorCode::Config: return "config_error";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::Transport: return "transport_error";
        case ErrorCode::Io: return "io_error";
    }
    return "unknown";
}

}  // namespace vchat
