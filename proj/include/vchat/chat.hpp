#pragma once

// History-conditioned chat over textualized videos.
//
// Every round builds its prompt from the video document plus the complete
// prior history, so the answer at round t is conditioned on all earlier
// questions and answers. Sessions are append-only and a failed ask never
// changes history.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchat/clock.hpp"
#include "vchat/document.hpp"
#include "vchat/llm_client.hpp"
#include "vchat/prompt.hpp"
#include "vchat/timeline.hpp"

namespace vchat {

struct RegisteredVideo {
    VideoTimeline timeline;
    AssemblyPolicy policy;
    TextualizedVideo document;
    std::string rendered;
};

RegisteredVideo make_registered(VideoTimeline timeline, const AssemblyPolicy& policy = {});

/// Thread-safe id -> video map.
class VideoCatalog {
public:
    /// Assembles the document up front. Throws Conflict for a known id.
    std::shared_ptr<const RegisteredVideo> add(VideoTimeline timeline, const AssemblyPolicy& policy = {});
    std::shared_ptr<const RegisteredVideo> find(const std::string& video_id) const;
    /// Throws NotFound.
    std::shared_ptr<const RegisteredVideo> get(const std::string& video_id) const;
    std::vector<std::string> ids() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const RegisteredVideo>> videos_;
};

enum class SessionStatus { Open, Closed };

std::string_view to_string(SessionStatus status) noexcept;

struct ChatRound {
    std::string question;
    std::string answer;
    std::string model_id;
    std::string asked_at;
    std::string answered_at;
    bool document_truncated = false;

    bool operator==(const ChatRound&) const = default;
};

struct ChatSession {
    std::string session_id;
    std::string video_id;
    std::vector<ChatRound> history;
    LlmParams params;
    SessionStatus status = SessionStatus::Open;

    bool operator==(const ChatSession&) const = default;
};

nlohmann::json session_to_json(const ChatSession& session);

std::vector<QaPair> qa_history(const std::vector<ChatRound>& history);

struct AskResult {
    std::string prompt;
    std::string answer;
    bool document_truncated = false;
};

/// One round without any session bookkeeping. On overflow the document is
/// truncated to the budget left after the rest of the prompt and the round is
/// retried once; a second overflow throws Error(Overflow).
AskResult ask_round(const RegisteredVideo& video, const std::vector<QaPair>& history,
                    const std::string& question, LlmClient& client, const LlmParams& params,
                    const ChunkSink& sink = nullptr);

/// Runs the questions as one fresh session against the video.
std::vector<ChatRound> replay(const std::vector<std::string>& questions, const RegisteredVideo& video,
                              LlmClient& client, const LlmParams& params, const WallClock& clock = utc_now);

/// Append-only JSONL of {event, session_id, round, payload, wall_time}.
class SessionEventLog {
public:
    explicit SessionEventLog(std::filesystem::path path);
    void append(const std::string& event, const std::string& session_id, std::size_t round,
                const nlohmann::json& payload, const std::string& wall_time);
    const std::filesystem::path& path() const noexcept { return path_; }

    /// Reads every event. Throws Parse naming the line for malformed entries;
    /// a missing file reads as empty.
    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

class ChatOrchestrator {
public:
    /// With a log path, sessions recorded there are restored first.
    ChatOrchestrator(std::shared_ptr<VideoCatalog> catalog, std::shared_ptr<LlmClient> client,
                     LlmParams default_params = {},
                     std::optional<std::filesystem::path> log_path = std::nullopt,
                     WallClock clock = utc_now);

    /// Throws NotFound for unknown videos.
    ChatSession open_session(const std::string& video_id, std::optional<LlmParams> params = std::nullopt);

    /// Throws NotFound, State (closed), InvalidArgument (empty question),
    /// Overflow or Transport. History is unchanged on any failure. Asks on
    /// one session are serialized.
    std::string ask(const std::string& session_id, const std::string& question,
                    const ChunkSink& sink = nullptr);

    /// The checks ask() performs before calling the model.
    void check_askable(const std::string& session_id, const std::string& question) const;

    ChatSession close(const std::string& session_id);
    ChatSession session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

private:
    struct Slot {
        std::mutex ask_mutex;           // held across the model call
        mutable std::mutex data_mutex;  // guards `session`
        ChatSession session;
    };

    std::shared_ptr<Slot> slot(const std::string& session_id) const;
    void restore(const std::vector<nlohmann::json>& events);

    std::shared_ptr<VideoCatalog> catalog_;
    std::shared_ptr<LlmClient> client_;
    LlmParams default_params_;
    std::unique_ptr<SessionEventLog> log_;
    WallClock clock_;

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::size_t next_id_ = 1;
};

nlohmann::json params_to_json(const LlmParams& params);
LlmParams params_from_json(const nlohmann::json& j);

}  // namespace vchat
