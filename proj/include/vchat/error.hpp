#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace vchat {

enum class ErrorCode {
    InvalidArgument,
    OutOfRange,
    AdapterUnavailable,
    MalformedResponse,
    Parse,
    Environment,
    Subprocess,
    AmbiguousHeader,
    BudgetTooSmall,
    Binding,
    Serialization,
    Overflow,
    NotFound,
    State,
    Forge,
    Config,
    Conflict,
    Transport,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure surfaced by the library. The code is
/// machine readable and is what the HTTP layer maps to a status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when an LLM reply cannot be turned into a record. Keeps the raw
/// reply so it can be audited later.
class ReplyParseError : public Error {
public:
    ReplyParseError(const std::string& message, std::string raw_reply)
        : Error(ErrorCode::Parse, message), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string raw_reply_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace vchat
