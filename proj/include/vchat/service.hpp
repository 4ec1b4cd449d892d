#pragma once

// HTTP service: video registration, documents, streamed chat sessions and
// forge jobs over file-backed state in data_dir.
//
//   data_dir/videos/<video_id>.json   registered fixtures
//   data_dir/sessions.jsonl           session event log
//   data_dir/jobs/out<k>/             default forge output

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchat/chat.hpp"
#include "vchat/error.hpp"
#include "vchat/job.hpp"
#include "vchat/llm_client.hpp"

namespace httplib {
class Server;
}

namespace vchat {

/// Flat "key = value" file; '#' starts a comment line. Keys:
///   listen_host, listen_port, data_dir (required), adapter_registry,
///   template_dir, llm_endpoint ("mock" or an http URL), llm_model_id,
///   llm_temperature, llm_max_output_tokens, llm_context_budget_chars,
///   llm_api_key_env, service_token_env, server_threads, forge_parallelism
/// Secrets never live here: keys and tokens are named by environment variable.
struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;  // 0 picks a free port
    std::filesystem::path data_dir;
    std::optional<std::filesystem::path> adapter_registry;
    std::optional<std::filesystem::path> template_dir;
    std::string llm_endpoint = "mock";
    LlmParams llm;
    std::string llm_api_key_env = "VCHAT_LLM_API_KEY";
    std::string service_token_env = "VCHAT_SERVICE_TOKEN";
    std::size_t server_threads = 8;
    std::size_t forge_parallelism = 4;
};

/// Throws Error(Config) naming the line for unknown keys, duplicates,
/// malformed values or secrets.
ServiceConfig parse_service_config(const std::string& text);
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Fail-fast startup checks: data_dir writable, referenced files present and
/// valid. Throws Error(Config).
void check_service_config(const ServiceConfig& config);

/// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState state) noexcept;

struct JobHandle {
    std::string job_id;
    JobState state = JobState::Queued;
    JobStats stats;
    std::string error;
    std::filesystem::path output_dir;
};

nlohmann::json job_handle_to_json(const JobHandle& handle);

class JobManager {
public:
    JobManager(std::shared_ptr<LlmClient> client, std::size_t parallelism_cap);
    ~JobManager();

    JobHandle submit(ForgeJobConfig config);
    /// Throws NotFound.
    JobHandle get(const std::string& job_id) const;
    /// Blocks until the job leaves queued/running.
    JobHandle wait(const std::string& job_id) const;

private:
    struct Entry;
    std::shared_ptr<LlmClient> client_;
    std::size_t cap_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> jobs_;
    std::vector<std::jthread> threads_;
    std::atomic<bool> cancel_{false};
    std::size_t next_id_ = 1;
};

class Service {
public:
    /// Loads persisted videos and sessions. `client` overrides the one the
    /// config names (tests inject fault clients this way).
    explicit Service(ServiceConfig config, std::shared_ptr<LlmClient> client = nullptr);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();

    VideoCatalog& catalog() { return *catalog_; }
    ChatOrchestrator& chat() { return *chat_; }
    JobManager& jobs() { return *jobs_; }
    const ServiceConfig& config() const { return config_; }

private:
    void routes();

    ServiceConfig config_;
    std::shared_ptr<LlmClient> client_;
    std::shared_ptr<VideoCatalog> catalog_;
    std::unique_ptr<ChatOrchestrator> chat_;
    std::unique_ptr<JobManager> jobs_;
    std::unique_ptr<httplib::Server> server_;
    std::mutex register_mutex_;
    std::thread listener_;
    int port_ = -1;
};

/// LLM client named by the config: the mock or an HTTP endpoint.
std::shared_ptr<LlmClient> make_llm_client(const std::string& endpoint, const std::string& api_key_env);

/// Video ids double as file names: [A-Za-z0-9][A-Za-z0-9._-]*.
bool valid_video_id(const std::string& id);

}  // namespace vchat
