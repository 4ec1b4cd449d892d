#pragma once

// Boundary to the perception models. Every model (image captioner, action
// recognizer, dense captioner, speech recognizer, text refiner) sits behind
// one wire contract, so live endpoints, stubs and fixtures are
// interchangeable. All records pass through validation here before they can
// reach a timeline.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "vchat/timeline.hpp"

namespace vchat {

enum class Modality { Image, Video, Audio, Text };

std::string_view to_string(Modality m) noexcept;
Modality parse_modality(std::string_view name);

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_base_ms = 200;
};

struct AdapterDescriptor {
    std::string name;
    Modality modality = Modality::Image;
    std::string endpoint;
    int timeout_ms = 10000;
    std::set<RecordKind> emits;
    RetryPolicy retry;
};

void validate_descriptor(const AdapterDescriptor& adapter);

/// Registry file: {"adapters": [{name, modality, endpoint, timeout_ms, emits, retry}]}.
std::vector<AdapterDescriptor> load_adapter_registry(const std::filesystem::path& path);

struct MediaRef {
    std::string video_id;
    std::string uri;
    double duration_s = 0.0;
};

/// Posts a JSON body and returns the body of a 2xx reply. Anything else,
/// including timeouts, throws Error(Transport).
class AdapterTransport {
public:
    virtual ~AdapterTransport() = default;
    virtual std::string post(const std::string& endpoint, const std::string& body,
                             std::chrono::milliseconds timeout) = 0;
};

class HttpAdapterTransport final : public AdapterTransport {
public:
    std::string post(const std::string& endpoint, const std::string& body,
                     std::chrono::milliseconds timeout) override;
};

struct CallLogEntry {
    std::string adapter;
    int attempt = 0;
    bool ok = false;
    std::string detail;
};

/// Append-only record of every transport attempt; safe under concurrent use.
class CallLog {
public:
    void append(CallLogEntry entry);
    std::vector<CallLogEntry> entries() const;
    std::size_t attempts_for(const std::string& adapter) const;

private:
    mutable std::mutex mutex_;
    std::vector<CallLogEntry> entries_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class PerceptionGateway {
public:
    explicit PerceptionGateway(std::shared_ptr<AdapterTransport> transport,
                               Sleeper sleeper = nullptr);

    /// Runs an image/video/audio adapter over a span. Image adapters take a
    /// degenerate span [t, t].
    std::vector<PerceptionRecord> invoke_adapter(const AdapterDescriptor& adapter,
                                                 const MediaRef& media, Span span);

    /// Speech recognition over the whole media. Silent audio gives [].
    std::vector<PerceptionRecord> transcribe_audio(const AdapterDescriptor& adapter,
                                                   const MediaRef& media);

    std::string refine_text(const AdapterDescriptor& adapter, const std::string& raw);

    /// One image-adapter call per frame time, at most `parallelism` in flight.
    /// Results come back in frame order.
    std::vector<PerceptionRecord> perceive_frames(const AdapterDescriptor& adapter,
                                                  const MediaRef& media,
                                                  const std::vector<Timecode>& frame_times,
                                                  std::size_t parallelism);

    const CallLog& call_log() const noexcept { return log_; }

private:
    std::string call_with_retry(const AdapterDescriptor& adapter, const std::string& body);

    std::shared_ptr<AdapterTransport> transport_;
    Sleeper sleeper_;
    CallLog log_;
};

/// Backoff before attempt `attempt + 1` (attempt is 1-based).
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

}  // namespace vchat
