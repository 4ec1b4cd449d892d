#include "vchat/service.hpp"

#include <condition_variable>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <httplib.h>

#include "vchat/dataset.hpp"
#include "vchat/error.hpp"
#include "vchat/fixture.hpp"
#include "vchat/perception.hpp"
#include "vchat/prompt.hpp"

namespace vchat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& value, const std::string& where) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) fail(ErrorCode::Config, where + ": bad number '" + value + "'");
    return out;
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::Parse, "request body is not valid JSON");
    if (!j.is_object()) fail(ErrorCode::Parse, "request body must be a JSON object");
    return j;
}

// Runs a handler, mapping library errors to {code, message} bodies.
template <typename Fn>
auto guarded(Fn fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, http_status(e.code()), to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

json video_descriptor(const RegisteredVideo& v) {
    return {{"video_id", v.timeline.video_id},
            {"duration_s", v.timeline.duration_s},
            {"fps", v.timeline.fps},
            {"records", v.timeline.records.size()}};
}

}  // namespace

ServiceConfig parse_service_config(const std::string& text) {
    ServiceConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    std::set<std::string> seen;
    bool have_data_dir = false;
    while (std::getline(in, line)) {
        ++n;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto where = "config line " + std::to_string(n);
        auto eq = t.find('=');
        if (eq == std::string::npos) fail(ErrorCode::Config, where + ": expected key = value");
        auto key = trim(std::string_view(t).substr(0, eq));
        auto value = trim(std::string_view(t).substr(eq + 1));
        if (!seen.insert(key).second) fail(ErrorCode::Config, where + ": duplicate key '" + key + "'");
        if (key.find("api_key") != std::string::npos && !key.ends_with("_env")) {
            fail(ErrorCode::Config, where + ": secrets belong in the environment, not the config file");
        }
        if (key == "listen_host") c.listen_host = value;
        else if (key == "listen_port") c.listen_port = parse_number<int>(value, where);
        else if (key == "data_dir") c.data_dir = value, have_data_dir = true;
        else if (key == "adapter_registry") c.adapter_registry = value;
        else if (key == "template_dir") c.template_dir = value;
        else if (key == "llm_endpoint") c.llm_endpoint = value;
        else if (key == "llm_model_id") c.llm.model_id = value;
        else if (key == "llm_temperature") c.llm.temperature = parse_number<double>(value, where);
        else if (key == "llm_max_output_tokens") c.llm.max_output_tokens = parse_number<int>(value, where);
        else if (key == "llm_context_budget_chars") c.llm.context_budget_chars = parse_number<std::size_t>(value, where);
        else if (key == "llm_api_key_env") c.llm_api_key_env = value;
        else if (key == "service_token_env") c.service_token_env = value;
        else if (key == "server_threads") c.server_threads = parse_number<std::size_t>(value, where);
        else if (key == "forge_parallelism") c.forge_parallelism = parse_number<std::size_t>(value, where);
        else fail(ErrorCode::Config, where + ": unknown key '" + key + "'");
    }
    if (!have_data_dir || c.data_dir.empty()) fail(ErrorCode::Config, "config: data_dir is required");
    if (c.listen_port < 0 || c.listen_port > 65535) fail(ErrorCode::Config, "config: listen_port out of range");
    if (c.server_threads < 1 || c.forge_parallelism < 1) {
        fail(ErrorCode::Config, "config: server_threads and forge_parallelism must be >= 1");
    }
    try {
        validate_params(c.llm);
    } catch (const Error& e) {
        fail(ErrorCode::Config, std::string("config: ") + e.what());
    }
    return c;
}

ServiceConfig load_service_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Config, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto c = parse_service_config(ss.str());
    // Relative paths are relative to the config file.
    auto base = path.parent_path();
    auto resolve = [&](fs::path& p) {
        if (p.is_relative()) p = base / p;
    };
    resolve(c.data_dir);
    if (c.adapter_registry) resolve(*c.adapter_registry);
    if (c.template_dir) resolve(*c.template_dir);
    return c;
}

void check_service_config(const ServiceConfig& c) {
    std::error_code ec;
    fs::create_directories(c.data_dir / "videos", ec);
    if (ec) fail(ErrorCode::Config, "data_dir " + c.data_dir.string() + " is not writable: " + ec.message());
    auto probe = c.data_dir / ".write_probe";
    {
        std::ofstream out(probe);
        out << "ok";
        if (!out) fail(ErrorCode::Config, "data_dir " + c.data_dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
    if (c.adapter_registry) {
        if (!fs::exists(*c.adapter_registry)) {
            fail(ErrorCode::Config, "adapter registry " + c.adapter_registry->string() + " does not exist");
        }
        (void)load_adapter_registry(*c.adapter_registry);
    }
    if (c.template_dir) (void)load_template_dir(*c.template_dir);
    if (c.llm_endpoint != "mock" && !c.llm_endpoint.starts_with("http://") &&
        !c.llm_endpoint.starts_with("https://")) {
        fail(ErrorCode::Config, "llm_endpoint must be 'mock' or an http(s) URL");
    }
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::OutOfRange:
        case ErrorCode::Parse:
        case ErrorCode::AmbiguousHeader:
        case ErrorCode::BudgetTooSmall:
        case ErrorCode::Binding:
        case ErrorCode::Serialization:
        case ErrorCode::Config:
            return 400;
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::Conflict:
        case ErrorCode::State:
            return 409;
        case ErrorCode::Overflow:
            return 413;
        case ErrorCode::AdapterUnavailable:
        case ErrorCode::MalformedResponse:
        case ErrorCode::Transport:
            return 502;
        default:
            return 500;
    }
}

bool valid_video_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9][A-Za-z0-9._-]*");
    return std::regex_match(id, re);
}

std::shared_ptr<LlmClient> make_llm_client(const std::string& endpoint, const std::string& api_key_env) {
    if (endpoint == "mock") return std::make_shared<MockLlmClient>();
    return std::make_shared<HttpLlmClient>(endpoint, api_key_env);
}

std::string_view to_string(JobState state) noexcept {
    switch (state) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
    }
    return "unknown";
}

json job_handle_to_json(const JobHandle& h) {
    json j = {{"job_id", h.job_id},
              {"state", std::string(to_string(h.state))},
              {"stats", stats_to_json(h.stats)},
              {"output_dir", h.output_dir.string()}};
    if (!h.error.empty()) j["error"] = h.error;
    return j;
}

struct JobManager::Entry {
    mutable std::mutex mutex;
    mutable std::condition_variable cv;
    JobHandle handle;
};

JobManager::JobManager(std::shared_ptr<LlmClient> client, std::size_t parallelism_cap)
    : client_(std::move(client)), cap_(std::max<std::size_t>(1, parallelism_cap)) {}

JobManager::~JobManager() {
    cancel_ = true;
    threads_.clear();  // joins
}

JobHandle JobManager::submit(ForgeJobConfig config) {
    config.parallelism = std::min(std::max<std::size_t>(1, config.parallelism), cap_);
    validate_job_config(config);
    (void)load_corpus(config.fixture_dir);  // fail fast on an empty or missing dir
    auto entry = std::make_shared<Entry>();
    std::lock_guard lock(mutex_);
    entry->handle.job_id = "j" + std::to_string(next_id_++);
    entry->handle.output_dir = config.output_dir;
    entry->handle.stats.requested_descriptions = config.n_descriptions;
    entry->handle.stats.requested_conversations = config.n_conversations;
    entry->handle.stats.total_tasks = config.n_descriptions + config.n_conversations;
    jobs_.emplace(entry->handle.job_id, entry);
    auto snapshot = entry->handle;
    threads_.emplace_back([this, entry, config = std::move(config)] {
        auto set = [&](auto&& update) {
            std::lock_guard l(entry->mutex);
            update(entry->handle);
            entry->cv.notify_all();
        };
        set([](JobHandle& h) { h.state = JobState::Running; });
        try {
            auto stats = run_job(config, *client_,
                                 [&](const JobStats& s) { set([&](JobHandle& h) { h.stats = s; }); }, &cancel_);
            set([&](JobHandle& h) {
                h.stats = stats;
                h.state = JobState::Done;
            });
        } catch (const std::exception& e) {
            set([&](JobHandle& h) {
                h.error = e.what();
                h.state = JobState::Failed;
            });
        }
    });
    return snapshot;
}

JobHandle JobManager::get(const std::string& job_id) const {
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) fail(ErrorCode::NotFound, "unknown job '" + job_id + "'");
        entry = it->second;
    }
    std::lock_guard l(entry->mutex);
    return entry->handle;
}

JobHandle JobManager::wait(const std::string& job_id) const {
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) fail(ErrorCode::NotFound, "unknown job '" + job_id + "'");
        entry = it->second;
    }
    std::unique_lock l(entry->mutex);
    entry->cv.wait(l, [&] {
        return entry->handle.state == JobState::Done || entry->handle.state == JobState::Failed;
    });
    return entry->handle;
}

Service::Service(ServiceConfig config, std::shared_ptr<LlmClient> client) : config_(std::move(config)) {
    check_service_config(config_);
    client_ = client ? std::move(client) : make_llm_client(config_.llm_endpoint, config_.llm_api_key_env);
    catalog_ = std::make_shared<VideoCatalog>();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(config_.data_dir / "videos")) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) catalog_->add(load_fixture(f));
    chat_ = std::make_unique<ChatOrchestrator>(catalog_, client_, config_.llm, config_.data_dir / "sessions.jsonl");
    jobs_ = std::make_unique<JobManager>(client_, config_.forge_parallelism);
    server_ = std::make_unique<httplib::Server>();
    auto threads = config_.server_threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    routes();
}

Service::~Service() {
    stop();
    jobs_.reset();
}

void Service::routes() {
    auto& s = *server_;

    s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
        const char* token = std::getenv(config_.service_token_env.c_str());
        if (!token || !*token) return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == std::string("Bearer ") + token) {
            return httplib::Server::HandlerResponse::Unhandled;
        }
        send_error(res, 401, "unauthorized", "missing or wrong bearer token");
        return httplib::Server::HandlerResponse::Handled;
    });

    s.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"videos", catalog_->ids().size()}});
    }));

    s.Post("/videos", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto timeline = fixture_from_json(parse_body(req));
        if (!valid_video_id(timeline.video_id)) {
            fail(ErrorCode::InvalidArgument, "video_id must match [A-Za-z0-9][A-Za-z0-9._-]*");
        }
        std::lock_guard lock(register_mutex_);
        auto video = catalog_->add(timeline);
        save_fixture(timeline, config_.data_dir / "videos" / (timeline.video_id + ".json"));
        send_json(res, 201, video_descriptor(*video));
    }));

    s.Get("/videos", guarded([this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& id : catalog_->ids()) {
            if (auto v = catalog_->find(id)) out.push_back(video_descriptor(*v));
        }
        send_json(res, 200, out);
    }));

    s.Get(R"(/videos/([^/]+)/document)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto video = catalog_->get(req.matches[1]);
        std::string text = video->rendered;
        if (req.has_param("max_chars")) {
            auto policy = video->policy;
            std::size_t max_chars = 0;
            try {
                max_chars = std::stoul(req.get_param_value("max_chars"));
            } catch (const std::exception&) {
                fail(ErrorCode::InvalidArgument, "max_chars must be a non-negative integer");
            }
            policy.max_render_chars = max_chars;
            text = render(truncate_to_budget(video->document, policy));
        }
        res.status = 200;
        res.set_content(text, "text/plain; charset=utf-8");
    }));

    s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        if (!body.contains("video_id") || !body["video_id"].is_string()) {
            fail(ErrorCode::Parse, "body needs a string video_id");
        }
        std::optional<LlmParams> params;
        if (body.contains("params")) params = params_from_json(body["params"]);
        send_json(res, 201, session_to_json(chat_->open_session(body["video_id"], params)));
    }));

    s.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_to_json(chat_->session(req.matches[1])));
    }));

    s.Post(R"(/sessions/([^/]+)/close)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_to_json(chat_->close(req.matches[1])));
    }));

    // NDJSON events: {"type":"chunk","text"} ... then {"type":"done","answer","round"}
    // or {"type":"error","code","message"}.
    s.Post(R"(/sessions/([^/]+)/messages)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::string id = req.matches[1];
        auto body = parse_body(req);
        if (!body.contains("question") || !body["question"].is_string()) {
            fail(ErrorCode::Parse, "body needs a string question");
        }
        std::string question = body["question"];
        chat_->check_askable(id, question);
        res.status = 200;
        res.set_chunked_content_provider(
            "application/x-ndjson", [this, id, question](std::size_t, httplib::DataSink& sink) {
                auto emit = [&sink](const json& event) {
                    auto line = event.dump() + "\n";
                    sink.write(line.data(), line.size());
                };
                try {
                    auto answer = chat_->ask(id, question, [&](std::string_view chunk) {
                        emit({{"type", "chunk"}, {"text", std::string(chunk)}});
                    });
                    emit({{"type", "done"}, {"answer", answer}, {"round", chat_->session(id).history.size()}});
                } catch (const Error& e) {
                    emit({{"type", "error"}, {"code", to_string(e.code())}, {"message", e.what()}});
                } catch (const std::exception& e) {
                    emit({{"type", "error"}, {"code", "internal"}, {"message", e.what()}});
                }
                sink.done();
                return true;
            });
    }));

    s.Post("/forge/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        if (!body.contains("llm")) body["llm"] = params_to_json(config_.llm);
        auto config = job_config_from_json(body);
        if (config.fixture_dir.empty()) config.fixture_dir = config_.data_dir / "videos";
        if (config.fixture_dir.is_relative()) config.fixture_dir = config_.data_dir / config.fixture_dir;
        if (config.output_dir.empty()) {
            // One directory per submission, unique across restarts.
            std::size_t k = 1;
            while (fs::exists(config_.data_dir / "jobs" / ("out" + std::to_string(k)))) ++k;
            config.output_dir = config_.data_dir / "jobs" / ("out" + std::to_string(k));
            fs::create_directories(config.output_dir);
        } else if (config.output_dir.is_relative()) {
            config.output_dir = config_.data_dir / config.output_dir;
        }
        send_json(res, 202, job_handle_to_json(jobs_->submit(std::move(config))));
    }));

    s.Get(R"(/forge/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, job_handle_to_json(jobs_->get(req.matches[1])));
    }));

    s.Post("/datasets/validate", guarded([](const httplib::Request& req, httplib::Response& res) {
        std::istringstream in(req.body);
        send_json(res, 200, summary_to_json(validate_dataset(in)));
    }));
}

int Service::start() {
    if (listener_.joinable()) return port_;
    if (config_.listen_port == 0) {
        port_ = server_->bind_to_any_port(config_.listen_host);
    } else {
        port_ = server_->bind_to_port(config_.listen_host, config_.listen_port) ? config_.listen_port : -1;
    }
    if (port_ < 0) {
        fail(ErrorCode::Config, "cannot listen on " + config_.listen_host + ":" + std::to_string(config_.listen_port));
    }
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void Service::stop() {
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
}

}  // namespace vchat
