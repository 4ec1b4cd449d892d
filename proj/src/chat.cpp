#include "vchat/chat.hpp"

#include <algorithm>
#include <fstream>

#include "vchat/error.hpp"

namespace vchat {

using nlohmann::json;

RegisteredVideo make_registered(VideoTimeline timeline, const AssemblyPolicy& policy) {
    validate_timeline(timeline);
    RegisteredVideo v;
    v.document = assemble(timeline, policy);
    v.rendered = render(v.document);
    v.timeline = std::move(timeline);
    v.policy = policy;
    return v;
}

std::shared_ptr<const RegisteredVideo> VideoCatalog::add(VideoTimeline timeline, const AssemblyPolicy& policy) {
    auto id = timeline.video_id;
    if (id.empty()) fail(ErrorCode::InvalidArgument, "video_id is empty");
    {
        std::lock_guard lock(mutex_);
        if (videos_.count(id)) fail(ErrorCode::Conflict, "video '" + id + "' is already registered");
    }
    auto video = std::make_shared<const RegisteredVideo>(make_registered(std::move(timeline), policy));
    std::lock_guard lock(mutex_);
    if (!videos_.emplace(id, video).second) fail(ErrorCode::Conflict, "video '" + id + "' is already registered");
    return video;
}

std::shared_ptr<const RegisteredVideo> VideoCatalog::find(const std::string& video_id) const {
    std::lock_guard lock(mutex_);
    auto it = videos_.find(video_id);
    return it == videos_.end() ? nullptr : it->second;
}

std::shared_ptr<const RegisteredVideo> VideoCatalog::get(const std::string& video_id) const {
    auto v = find(video_id);
    if (!v) fail(ErrorCode::NotFound, "unknown video '" + video_id + "'");
    return v;
}

std::vector<std::string> VideoCatalog::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : videos_) out.push_back(id);
    return out;
}

std::string_view to_string(SessionStatus status) noexcept {
    return status == SessionStatus::Open ? "open" : "closed";
}

json params_to_json(const LlmParams& p) {
    return {{"model_id", p.model_id},
            {"temperature", p.temperature},
            {"max_output_tokens", p.max_output_tokens},
            {"context_budget_chars", p.context_budget_chars}};
}

LlmParams params_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Parse, "params must be an object");
    LlmParams p;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "model_id") p.model_id = value.get<std::string>();
            else if (key == "temperature") p.temperature = value.get<double>();
            else if (key == "max_output_tokens") p.max_output_tokens = value.get<int>();
            else if (key == "context_budget_chars") {
                if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0))
                    fail(ErrorCode::Parse, "context_budget_chars must be a non-negative integer");
                p.context_budget_chars = value.get<std::size_t>();
            }
            else fail(ErrorCode::Parse, "unknown params field '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Parse, std::string("bad params: ") + e.what());
    }
    try {
        validate_params(p);
    } catch (const Error& e) {
        fail(ErrorCode::Parse, e.what());
    }
    return p;
}

namespace {

json round_to_json(const ChatRound& r) {
    return {{"question", r.question},       {"answer", r.answer},
            {"model_id", r.model_id},       {"asked_at", r.asked_at},
            {"answered_at", r.answered_at}, {"document_truncated", r.document_truncated}};
}

ChatRound round_from_json(const json& j) {
    ChatRound r;
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.asked_at = j.value("asked_at", "");
    r.answered_at = j.value("answered_at", "");
    r.document_truncated = j.value("document_truncated", false);
    return r;
}

}  // namespace

json session_to_json(const ChatSession& s) {
    json history = json::array();
    for (std::size_t i = 0; i < s.history.size(); ++i) {
        auto r = round_to_json(s.history[i]);
        r["round"] = i + 1;
        history.push_back(std::move(r));
    }
    return {{"session_id", s.session_id},
            {"video_id", s.video_id},
            {"status", std::string(to_string(s.status))},
            {"params", params_to_json(s.params)},
            {"history", std::move(history)}};
}

std::vector<QaPair> qa_history(const std::vector<ChatRound>& history) {
    std::vector<QaPair> out;
    out.reserve(history.size());
    for (const auto& r : history) out.push_back({r.question, r.answer});
    return out;
}

AskResult ask_round(const RegisteredVideo& video, const std::vector<QaPair>& history,
                    const std::string& question, LlmClient& client, const LlmParams& params,
                    const ChunkSink& sink) {
    validate_params(params);
    const double fps = video.timeline.fps;
    const std::size_t budget = params.context_budget_chars;
    AskResult result;
    try {
        result.prompt = build_chat_prompt(video.rendered, history, question, fps, budget);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Overflow) throw;
        // Whatever is left after the non-document part goes to the document.
        auto full = build_chat_prompt(video.rendered, history, question, fps);
        std::size_t overhead = full.size() - video.rendered.size();
        if (overhead >= budget) {
            fail(ErrorCode::Overflow, "history and question alone exceed the context budget of " +
                                          std::to_string(budget));
        }
        auto policy = video.policy;
        policy.max_render_chars = budget - overhead;
        TextualizedVideo truncated;
        try {
            truncated = truncate_to_budget(video.document, policy);
        } catch (const Error& te) {
            if (te.code() != ErrorCode::BudgetTooSmall) throw;
            fail(ErrorCode::Overflow, std::string("document cannot be truncated to fit: ") + te.what());
        }
        result.prompt = build_chat_prompt(render(truncated), history, question, fps, budget);
        result.document_truncated = true;
    }
    result.answer = complete_checked(client, result.prompt, params, sink);
    return result;
}

std::vector<ChatRound> replay(const std::vector<std::string>& questions, const RegisteredVideo& video,
                              LlmClient& client, const LlmParams& params, const WallClock& clock) {
    std::vector<ChatRound> rounds;
    std::vector<QaPair> history;
    for (const auto& q : questions) {
        ChatRound r;
        r.question = q;
        r.asked_at = clock();
        auto res = ask_round(video, history, q, client, params);
        r.answer = res.answer;
        r.model_id = params.model_id;
        r.answered_at = clock();
        r.document_truncated = res.document_truncated;
        history.push_back({q, res.answer});
        rounds.push_back(std::move(r));
    }
    return rounds;
}

SessionEventLog::SessionEventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void SessionEventLog::append(const std::string& event, const std::string& session_id, std::size_t round,
                             const json& payload, const std::string& wall_time) {
    json line = {{"event", event},
                 {"session_id", session_id},
                 {"round", round},
                 {"payload", payload},
                 {"wall_time", wall_time}};
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::Io, "cannot append to session log " + path_.string());
}

std::vector<json> SessionEventLog::read(const std::filesystem::path& path) {
    std::vector<json> events;
    std::ifstream in(path, std::ios::binary);
    if (!in) return events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("event") || !j["event"].is_string() ||
            !j.contains("session_id") || !j["session_id"].is_string()) {
            fail(ErrorCode::Parse, path.string() + ": line " + std::to_string(n) + ": malformed event");
        }
        events.push_back(std::move(j));
    }
    return events;
}

ChatOrchestrator::ChatOrchestrator(std::shared_ptr<VideoCatalog> catalog, std::shared_ptr<LlmClient> client,
                                   LlmParams default_params, std::optional<std::filesystem::path> log_path,
                                   WallClock clock)
    : catalog_(std::move(catalog)),
      client_(std::move(client)),
      default_params_(std::move(default_params)),
      clock_(std::move(clock)) {
    if (!catalog_ || !client_) fail(ErrorCode::InvalidArgument, "orchestrator needs a catalog and a client");
    validate_params(default_params_);
    if (log_path) {
        restore(SessionEventLog::read(*log_path));
        log_ = std::make_unique<SessionEventLog>(*log_path);
    }
}

void ChatOrchestrator::restore(const std::vector<json>& events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        auto where = "session log event " + std::to_string(i + 1);
        auto id = e["session_id"].get<std::string>();
        auto kind = e["event"].get<std::string>();
        try {
            if (kind == "open") {
                auto s = std::make_shared<Slot>();
                s->session.session_id = id;
                s->session.video_id = e.at("payload").at("video_id").get<std::string>();
                s->session.params = params_from_json(e.at("payload").at("params"));
                if (!slots_.emplace(id, s).second) fail(ErrorCode::Parse, where + ": session reopened");
                if (id.size() > 1 && id[0] == 's') {
                    next_id_ = std::max(next_id_, std::stoul(id.substr(1)) + 1);
                }
                continue;
            }
            auto it = slots_.find(id);
            if (it == slots_.end()) fail(ErrorCode::Parse, where + ": unknown session " + id);
            auto& session = it->second->session;
            if (kind == "ask") {
                if (e.at("round").get<std::size_t>() != session.history.size() + 1) {
                    fail(ErrorCode::Parse, where + ": round out of sequence");
                }
                session.history.push_back(round_from_json(e.at("payload")));
            } else if (kind == "close") {
                session.status = SessionStatus::Closed;
            } else {
                fail(ErrorCode::Parse, where + ": unknown event '" + kind + "'");
            }
        } catch (const json::exception& ex) {
            fail(ErrorCode::Parse, where + ": " + ex.what());
        }
    }
}

ChatSession ChatOrchestrator::open_session(const std::string& video_id, std::optional<LlmParams> params) {
    (void)catalog_->get(video_id);
    auto p = params.value_or(default_params_);
    validate_params(p);
    auto s = std::make_shared<Slot>();
    s->session.video_id = video_id;
    s->session.params = p;
    std::lock_guard lock(mutex_);
    s->session.session_id = "s" + std::to_string(next_id_);
    if (log_) {
        log_->append("open", s->session.session_id, 0, {{"video_id", video_id}, {"params", params_to_json(p)}},
                     clock_());
    }
    ++next_id_;
    slots_.emplace(s->session.session_id, s);
    return s->session;
}

std::shared_ptr<ChatOrchestrator::Slot> ChatOrchestrator::slot(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(session_id);
    if (it == slots_.end()) fail(ErrorCode::NotFound, "unknown session '" + session_id + "'");
    return it->second;
}

void ChatOrchestrator::check_askable(const std::string& session_id, const std::string& question) const {
    auto s = slot(session_id);
    {
        std::lock_guard lock(s->data_mutex);
        if (s->session.status != SessionStatus::Open) {
            fail(ErrorCode::State, "session '" + session_id + "' is closed");
        }
    }
    if (question.empty()) fail(ErrorCode::InvalidArgument, "question is empty");
}

std::string ChatOrchestrator::ask(const std::string& session_id, const std::string& question,
                                  const ChunkSink& sink) {
    auto s = slot(session_id);
    std::lock_guard serial(s->ask_mutex);
    check_askable(session_id, question);
    ChatSession snapshot;
    {
        std::lock_guard lock(s->data_mutex);
        snapshot = s->session;
    }
    auto video = catalog_->get(snapshot.video_id);

    ChatRound round;
    round.question = question;
    round.asked_at = clock_();
    auto result = ask_round(*video, qa_history(snapshot.history), question, *client_, snapshot.params, sink);
    round.answer = std::move(result.answer);
    round.model_id = snapshot.params.model_id;
    round.answered_at = clock_();
    round.document_truncated = result.document_truncated;

    // Log first: if the write fails the in-memory history stays as it was.
    if (log_) log_->append("ask", session_id, snapshot.history.size() + 1, round_to_json(round), round.answered_at);
    std::lock_guard lock(s->data_mutex);
    s->session.history.push_back(round);
    return round.answer;
}

ChatSession ChatOrchestrator::close(const std::string& session_id) {
    auto s = slot(session_id);
    std::lock_guard serial(s->ask_mutex);
    std::lock_guard lock(s->data_mutex);
    if (s->session.status == SessionStatus::Closed) {
        fail(ErrorCode::State, "session '" + session_id + "' is already closed");
    }
    if (log_) log_->append("close", session_id, s->session.history.size(), json::object(), clock_());
    s->session.status = SessionStatus::Closed;
    return s->session;
}

ChatSession ChatOrchestrator::session(const std::string& session_id) const {
    auto s = slot(session_id);
    std::lock_guard lock(s->data_mutex);
    return s->session;
}

std::vector<std::string> ChatOrchestrator::session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : slots_) out.push_back(id);
    return out;
}

}  // namespace vchat
