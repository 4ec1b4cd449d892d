#include "vchat/perception.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vchat/error.hpp"
#include "vchat/fixture.hpp"
#include "vchat/parallel.hpp"

namespace vchat {

using nlohmann::json;

namespace detail {

SplitUrl split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) fail(ErrorCode::InvalidArgument, "endpoint '" + url + "' has no scheme");
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

std::string_view to_string(Modality m) noexcept {
    switch (m) {
        case Modality::Image: return "image";
        case Modality::Video: return "video";
        case Modality::Audio: return "audio";
        case Modality::Text: return "text";
    }
    return "?";
}

Modality parse_modality(std::string_view name) {
    for (auto m : {Modality::Image, Modality::Video, Modality::Audio, Modality::Text}) {
        if (to_string(m) == name) return m;
    }
    fail(ErrorCode::Parse, "unknown modality '" + std::string(name) + "'");
}

void validate_descriptor(const AdapterDescriptor& a) {
    auto bad = [&](const std::string& why) {
        fail(ErrorCode::InvalidArgument, "adapter '" + a.name + "': " + why);
    };
    if (a.name.empty()) bad("name is empty");
    if (a.endpoint.empty()) bad("endpoint is empty");
    if (a.timeout_ms <= 0) bad("timeout_ms must be positive");
    if (a.retry.max_attempts < 1) bad("retry.max_attempts must be >= 1");
    if (a.retry.backoff_base_ms < 0) bad("retry.backoff_base_ms must be >= 0");
    if (a.modality == Modality::Text) {
        if (!a.emits.empty()) bad("text adapters emit no records");
    } else if (a.emits.empty()) {
        bad("emits is empty");
    }
}

std::vector<AdapterDescriptor> load_adapter_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Config, "cannot open adapter registry '" + path.string() + "'");
    std::vector<AdapterDescriptor> out;
    try {
        auto doc = json::parse(in);
        for (const auto& item : doc.at("adapters")) {
            AdapterDescriptor a;
            a.name = item.at("name").get<std::string>();
            a.modality = parse_modality(item.at("modality").get<std::string>());
            a.endpoint = item.at("endpoint").get<std::string>();
            a.timeout_ms = item.value("timeout_ms", a.timeout_ms);
            for (const auto& k : item.value("emits", json::array())) {
                a.emits.insert(parse_record_kind(k.get<std::string>()));
            }
            if (auto r = item.find("retry"); r != item.end()) {
                a.retry.max_attempts = r->value("max_attempts", a.retry.max_attempts);
                a.retry.backoff_base_ms = r->value("backoff_base_ms", a.retry.backoff_base_ms);
            }
            validate_descriptor(a);
            if (std::any_of(out.begin(), out.end(), [&](const auto& o) { return o.name == a.name; })) {
                fail(ErrorCode::Config, "duplicate adapter '" + a.name + "'");
            }
            out.push_back(std::move(a));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, "adapter registry '" + path.string() + "': " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        fail(ErrorCode::Config, "adapter registry '" + path.string() + "': " + e.what());
    }
    return out;
}

std::string HttpAdapterTransport::post(const std::string& endpoint, const std::string& body,
                                       std::chrono::milliseconds timeout) {
    auto url = detail::split_url(endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.path, body, "application/json");
    if (!res) {
        fail(ErrorCode::Transport, "POST " + endpoint + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        fail(ErrorCode::Transport, "POST " + endpoint + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
}

void CallLog::append(CallLogEntry entry) {
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<CallLogEntry> CallLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t CallLog::attempts_for(const std::string& adapter) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [&](const auto& e) { return e.adapter == adapter; }));
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
    long long delay = policy.backoff_base_ms;
    for (int i = 1; i < attempt && delay < (1LL << 40); ++i) delay *= 2;
    return std::chrono::milliseconds(delay);
}

PerceptionGateway::PerceptionGateway(std::shared_ptr<AdapterTransport> transport, Sleeper sleeper)
    : transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    if (!transport_) fail(ErrorCode::InvalidArgument, "gateway needs a transport");
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::string PerceptionGateway::call_with_retry(const AdapterDescriptor& adapter,
                                               const std::string& body) {
    std::string last_error;
    for (int attempt = 1; attempt <= adapter.retry.max_attempts; ++attempt) {
        try {
            auto reply = transport_->post(adapter.endpoint, body,
                                          std::chrono::milliseconds(adapter.timeout_ms));
            log_.append({adapter.name, attempt, true, {}});
            return reply;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport) throw;
            last_error = e.what();
            log_.append({adapter.name, attempt, false, last_error});
        }
        if (attempt < adapter.retry.max_attempts) sleeper_(backoff_delay(adapter.retry, attempt));
    }
    fail(ErrorCode::AdapterUnavailable,
         "adapter '" + adapter.name + "' unavailable after " +
             std::to_string(adapter.retry.max_attempts) + " attempts: " + last_error);
}

namespace {

std::vector<PerceptionRecord> parse_records(const AdapterDescriptor& adapter, const std::string& reply,
                                            Span requested) {
    auto malformed = [&](const std::string& why) {
        fail(ErrorCode::MalformedResponse, "adapter '" + adapter.name + "': " + why);
    };
    json doc;
    try {
        doc = json::parse(reply);
    } catch (const json::parse_error& e) {
        malformed(std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
        malformed("response has no records array");
    }

    std::vector<PerceptionRecord> out;
    const auto& list = doc["records"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "records[" + std::to_string(i) + "]: ";
        PerceptionRecord r;
        try {
            r = record_from_json(list[i], adapter.name, false);
        } catch (const Error& e) {
            malformed(where + e.what());
        }
        // The adapter name is the provenance, whatever the payload claims.
        r.source_model = adapter.name;
        if (!adapter.emits.contains(r.kind)) {
            malformed(where + "kind " + std::string(to_string(r.kind)) + " not declared in emits");
        }
        if (!requested.contains(r.span)) malformed(where + "span outside the requested span");
        out.push_back(std::move(r));
    }
    return out;
}

json base_request(const MediaRef& media, Span span, Modality modality) {
    return {{"video_id", media.video_id},
            {"media_ref", media.uri},
            {"span", {{"start_s", span.start.seconds()}, {"end_s", span.end.seconds()}}},
            {"modality", to_string(modality)}};
}

}  // namespace

std::vector<PerceptionRecord> PerceptionGateway::invoke_adapter(const AdapterDescriptor& adapter,
                                                                const MediaRef& media, Span span) {
    validate_descriptor(adapter);
    if (adapter.modality == Modality::Text) {
        fail(ErrorCode::InvalidArgument, "adapter '" + adapter.name + "' is a text adapter");
    }
    if (span.start > span.end || span.end.seconds() > media.duration_s) {
        fail(ErrorCode::OutOfRange, "requested span outside the media duration");
    }
    if (adapter.modality == Modality::Image && !span.degenerate()) {
        fail(ErrorCode::InvalidArgument, "image adapters take a single frame time");
    }
    auto reply = call_with_retry(adapter, base_request(media, span, adapter.modality).dump());
    return parse_records(adapter, reply, span);
}

std::vector<PerceptionRecord> PerceptionGateway::transcribe_audio(const AdapterDescriptor& adapter,
                                                                  const MediaRef& media) {
    if (adapter.modality != Modality::Audio) {
        fail(ErrorCode::InvalidArgument, "adapter '" + adapter.name + "' is not an audio adapter");
    }
    auto records = invoke_adapter(adapter, media, {Timecode(0.0), Timecode(media.duration_s)});
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.kind != RecordKind::Subtitle) {
            fail(ErrorCode::MalformedResponse, "adapter '" + adapter.name + "': non-subtitle record");
        }
        if (i > 0 && r.span.start < records[i - 1].span.end) {
            fail(ErrorCode::MalformedResponse,
                 "adapter '" + adapter.name + "': subtitle spans overlap or are out of order at records[" +
                     std::to_string(i) + "]");
        }
    }
    return records;
}

std::string PerceptionGateway::refine_text(const AdapterDescriptor& adapter, const std::string& raw) {
    validate_descriptor(adapter);
    if (adapter.modality != Modality::Text) {
        fail(ErrorCode::InvalidArgument, "adapter '" + adapter.name + "' is not a text adapter");
    }
    if (raw.empty()) fail(ErrorCode::InvalidArgument, "refine_text: input is empty");
    json request{{"modality", "text"}, {"text", raw}};
    auto reply = call_with_retry(adapter, request.dump());
    json doc;
    try {
        doc = json::parse(reply);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::MalformedResponse, "adapter '" + adapter.name + "': response is not JSON");
    }
    if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string() ||
        doc["text"].get<std::string>().empty()) {
        fail(ErrorCode::MalformedResponse, "adapter '" + adapter.name + "': missing or empty text");
    }
    return doc["text"].get<std::string>();
}

std::vector<PerceptionRecord> PerceptionGateway::perceive_frames(
    const AdapterDescriptor& adapter, const MediaRef& media, const std::vector<Timecode>& frame_times,
    std::size_t parallelism) {
    std::vector<std::vector<PerceptionRecord>> per_frame(frame_times.size());
    parallel_for(frame_times.size(), parallelism, [&](std::size_t i) {
        per_frame[i] = invoke_adapter(adapter, media, {frame_times[i], frame_times[i]});
    });
    std::vector<PerceptionRecord> out;
    for (auto& batch : per_frame) {
        out.insert(out.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    }
    return out;
}

}  // namespace vchat
