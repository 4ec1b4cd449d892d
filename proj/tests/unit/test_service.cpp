#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "test_support.hpp"
#include "vchat/dataset.hpp"
#include "vchat/fixture.hpp"
#include "vchat/service.hpp"

using namespace vchat;
using nlohmann::json;
using testing::error_code;
using testing::read_file;
namespace fs = std::filesystem;

namespace {

ServiceConfig test_config(const fs::path& data_dir) {
    ServiceConfig c;
    c.listen_port = 0;
    c.data_dir = data_dir;
    c.service_token_env = "VCHAT_TEST_TOKEN_UNSET";
    c.server_threads = 4;
    return c;
}

struct Running {
    explicit Running(ServiceConfig config, std::shared_ptr<LlmClient> client = nullptr)
        : service(std::move(config), std::move(client)), port(service.start()), http("127.0.0.1", port) {
        http.set_read_timeout(30, 0);
    }
    Service service;
    int port;
    httplib::Client http;

    httplib::Result post(const std::string& path, const json& body) {
        return http.Post(path, body.dump(), "application/json");
    }
};

std::vector<json> ndjson(const std::string& body) {
    std::vector<json> out;
    std::istringstream in(body);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

std::string friends_body() { return read_file(testing::friends_fixture()); }
std::string friends_id() { return json::parse(friends_body())["video_id"]; }

json wait_for_job(httplib::Client& http, const std::string& id, std::vector<std::string>* states = nullptr) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
    while (std::chrono::steady_clock::now() < deadline) {
        auto res = http.Get("/forge/jobs/" + id);
        REQUIRE(res);
        auto j = json::parse(res->body);
        std::string state = j["state"];
        if (states && (states->empty() || states->back() != state)) states->push_back(state);
        if (state == "done" || state == "failed") return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    FAIL("job did not finish");
    return {};
}

}  // namespace

TEST_CASE("service config parsing") {
    auto c = parse_service_config(
        "# comment\n"
        "listen_host = 0.0.0.0\n"
        "listen_port = 9000\n"
        "data_dir = /tmp/vchat\n"
        "llm_endpoint = http://localhost:11434/api/generate\n"
        "llm_model_id = vicuna\n"
        "llm_temperature = 0.2\n"
        "llm_context_budget_chars = 4000\n"
        "forge_parallelism = 2\n");
    CHECK(c.listen_host == "0.0.0.0");
    CHECK(c.listen_port == 9000);
    CHECK(c.data_dir == "/tmp/vchat");
    CHECK(c.llm.model_id == "vicuna");
    CHECK(c.llm.temperature == doctest::Approx(0.2));
    CHECK(c.llm.context_budget_chars == 4000);
    CHECK(c.forge_parallelism == 2);

    auto bad = [](const std::string& text) { return error_code([&] { parse_service_config(text); }); };
    CHECK(bad("listen_port = 1\n") == ErrorCode::Config);  // no data_dir
    CHECK(bad("data_dir = x\ncolour = red\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\ndata_dir = y\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\nllm_api_key = sk-123\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\nlisten_port = eighty\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\nlisten_port = 70000\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\njust words\n") == ErrorCode::Config);
    CHECK(bad("data_dir = x\nserver_threads = 0\n") == ErrorCode::Config);
    CHECK_FALSE(bad("data_dir = x\nllm_api_key_env = MY_KEY\n"));

    try {
        parse_service_config("data_dir = x\n\nbogus = 1\n");
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("sample service config loads and passes startup checks") {
    auto c = load_service_config(testing::data_dir() / "service.conf");
    CHECK(c.data_dir.is_absolute());
    CHECK(c.llm_endpoint == "mock");
    REQUIRE(c.adapter_registry);
    CHECK(fs::exists(*c.adapter_registry));
}

TEST_CASE("startup fails fast on missing referenced files") {
    testing::TempDir dir;
    auto c = test_config(dir.path());
    CHECK_FALSE(error_code([&] { check_service_config(c); }));
    c.adapter_registry = dir / "missing.json";
    CHECK(error_code([&] { check_service_config(c); }) == ErrorCode::Config);
    c = test_config(dir.path());
    c.template_dir = dir / "no_templates";
    CHECK(error_code([&] { check_service_config(c); }).has_value());
    c = test_config(dir.path());
    c.llm_endpoint = "ftp://nowhere";
    CHECK(error_code([&] { check_service_config(c); }) == ErrorCode::Config);
    c = test_config("/proc/vchat_not_writable");
    CHECK(error_code([&] { check_service_config(c); }) == ErrorCode::Config);
}

TEST_CASE("error codes map to http statuses") {
    CHECK(http_status(ErrorCode::NotFound) == 404);
    CHECK(http_status(ErrorCode::Conflict) == 409);
    CHECK(http_status(ErrorCode::State) == 409);
    CHECK(http_status(ErrorCode::Parse) == 400);
    CHECK(http_status(ErrorCode::InvalidArgument) == 400);
    CHECK(http_status(ErrorCode::Config) == 400);
    CHECK(http_status(ErrorCode::Overflow) == 413);
    CHECK(http_status(ErrorCode::Transport) == 502);
    CHECK(http_status(ErrorCode::Io) == 500);
    CHECK(valid_video_id("friends_clip"));
    CHECK(valid_video_id("a.b-c"));
    CHECK_FALSE(valid_video_id("../etc"));
    CHECK_FALSE(valid_video_id(""));
    CHECK_FALSE(valid_video_id("a/b"));
}

TEST_CASE("register, fetch document, chat with streaming") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));

    auto health = s.http.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");

    auto reg = s.http.Post("/videos", friends_body(), "application/json");
    REQUIRE(reg);
    CHECK(reg->status == 201);
    CHECK(json::parse(reg->body)["video_id"] == friends_id());
    auto dup = s.http.Post("/videos", friends_body(), "application/json");
    CHECK(dup->status == 409);
    CHECK(json::parse(dup->body)["code"] == "conflict");

    auto list = s.http.Get("/videos");
    CHECK(json::parse(list->body).size() == 1);

    auto doc = s.http.Get("/videos/" + friends_id() + "/document");
    REQUIRE(doc);
    CHECK(doc->status == 200);
    CHECK(doc->get_header_value("Content-Type").starts_with("text/plain"));
    CHECK(doc->body.find("00:00-00:02: Hey, Pheebs") != std::string::npos);
    CHECK(doc->body == render(assemble(load_fixture(testing::friends_fixture()), AssemblyPolicy{})));
    auto cut = s.http.Get("/videos/" + friends_id() + "/document?max_chars=300");
    CHECK(cut->body.size() <= 300);
    CHECK(s.http.Get("/videos/" + friends_id() + "/document?max_chars=lots")->status == 400);
    CHECK(s.http.Get("/videos/nope/document")->status == 404);

    auto opened = s.post("/sessions", {{"video_id", friends_id()}});
    REQUIRE(opened);
    CHECK(opened->status == 201);
    std::string sid = json::parse(opened->body)["session_id"];
    CHECK(s.post("/sessions", {{"video_id", "nope"}})->status == 404);

    std::vector<std::string> answers;
    for (const char* q : {"What is the woman eating?", "Who is on the couch?", "What happens next?"}) {
        auto res = s.post("/sessions/" + sid + "/messages", {{"question", q}});
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
        auto events = ndjson(res->body);
        REQUIRE(events.size() >= 2);
        std::string streamed;
        for (std::size_t i = 0; i + 1 < events.size(); ++i) {
            CHECK(events[i]["type"] == "chunk");
            streamed += events[i]["text"].get<std::string>();
        }
        CHECK(events.back()["type"] == "done");
        CHECK(events.back()["answer"] == streamed);
        CHECK(events.back()["round"] == answers.size() + 1);
        answers.push_back(streamed);
    }
    auto history = json::parse(s.http.Get("/sessions/" + sid)->body)["history"];
    REQUIRE(history.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(history[i]["answer"] == answers[i]);
        CHECK(history[i]["round"] == i + 1);
    }

    CHECK(s.post("/sessions/s999/messages", {{"question", "hi"}})->status == 404);
    CHECK(json::parse(s.post("/sessions/s999/messages", {{"question", "hi"}})->body)["code"] == "not_found");
    CHECK(s.post("/sessions/" + sid + "/messages", {{"question", ""}})->status == 400);
    CHECK(s.post("/sessions/" + sid + "/messages", {{"q", "x"}})->status == 400);
    CHECK(s.http.Post("/sessions/" + sid + "/messages", "{not json", "application/json")->status == 400);

    CHECK(s.post("/sessions/" + sid + "/close", json::object())->status == 200);
    auto closed = s.post("/sessions/" + sid + "/messages", {{"question", "still there?"}});
    CHECK(closed->status == 409);
    CHECK(json::parse(closed->body)["code"] == "state_error");
}

TEST_CASE("registration does not depend on the request content type") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));
    // Larger than httplib's default form-body cap.
    auto body = friends_body();
    REQUIRE(body.size() > 8192);
    auto res = s.http.Post("/videos", body, "application/x-www-form-urlencoded");
    REQUIRE(res);
    CHECK(res->status == 201);
}

TEST_CASE("malformed registrations are rejected with machine-readable bodies") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));
    auto res = s.http.Post("/videos", "[1,2]", "application/json");
    CHECK(res->status == 400);
    auto body = json::parse(res->body);
    CHECK(body.contains("code"));
    CHECK(body.contains("message"));
    auto fixture = json::parse(friends_body());
    fixture["video_id"] = "../escape";
    CHECK(s.http.Post("/videos", fixture.dump(), "application/json")->status == 400);
    CHECK_FALSE(fs::exists(dir.path().parent_path() / "escape.json"));
}

TEST_CASE("context overflow arrives as a stream error and leaves history alone") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));
    s.http.Post("/videos", friends_body(), "application/json");
    auto opened = s.post("/sessions", {{"video_id", friends_id()}, {"params", {{"context_budget_chars", 50}}}});
    REQUIRE(opened->status == 201);
    std::string sid = json::parse(opened->body)["session_id"];
    auto events = ndjson(s.post("/sessions/" + sid + "/messages", {{"question", "What is there?"}})->body);
    REQUIRE_FALSE(events.empty());
    CHECK(events.back()["type"] == "error");
    CHECK(events.back()["code"] == "context_overflow");
    CHECK(json::parse(s.http.Get("/sessions/" + sid)->body)["history"].empty());
    CHECK(s.post("/sessions", {{"video_id", friends_id()}, {"params", {{"context_budget_chars", -5}}}})->status ==
          400);
}

TEST_CASE("restart preserves videos and session histories") {
    testing::TempDir dir;
    std::string sid;
    json before;
    {
        Running s(test_config(dir.path()));
        s.http.Post("/videos", friends_body(), "application/json");
        sid = json::parse(s.post("/sessions", {{"video_id", friends_id()}})->body)["session_id"];
        s.post("/sessions/" + sid + "/messages", {{"question", "What is on the table?"}});
        s.post("/sessions/" + sid + "/messages", {{"question", "And then?"}});
        before = json::parse(s.http.Get("/sessions/" + sid)->body);
    }
    Running s(test_config(dir.path()));
    auto videos = json::parse(s.http.Get("/videos")->body);
    REQUIRE(videos.size() == 1);
    CHECK(videos[0]["video_id"] == friends_id());
    auto after = json::parse(s.http.Get("/sessions/" + sid)->body);
    CHECK(after == before);
    CHECK(after["history"].size() == 2);

    // New sessions do not collide with restored ones.
    std::string next = json::parse(s.post("/sessions", {{"video_id", friends_id()}})->body)["session_id"];
    CHECK(next != sid);
    auto res = s.post("/sessions/" + sid + "/messages", {{"question", "Anything else?"}});
    CHECK(ndjson(res->body).back()["round"] == 3);
}

TEST_CASE("concurrent sessions each keep their own history") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));
    s.http.Post("/videos", friends_body(), "application/json");
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
        ids.push_back(json::parse(s.post("/sessions", {{"video_id", friends_id()}})->body)["session_id"]);
    }
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", s.port);
            for (int r = 0; r < 3; ++r) {
                auto q = json{{"question", "question " + std::to_string(i) + "." + std::to_string(r)}};
                c.Post("/sessions/" + ids[i] + "/messages", q.dump(), "application/json");
            }
        });
    }
    for (auto& t : threads) t.join();
    for (int i = 0; i < 4; ++i) {
        auto history = json::parse(s.http.Get("/sessions/" + ids[i])->body)["history"];
        REQUIRE(history.size() == 3);
        for (int r = 0; r < 3; ++r) {
            CHECK(history[r]["question"] == "question " + std::to_string(i) + "." + std::to_string(r));
        }
    }
}

TEST_CASE("forge job over the corpus reaches done with produced = 10") {
    testing::TempDir dir, direct;
    Running s(test_config(dir.path()));
    json body = {{"fixture_dir", testing::corpus_dir().string()},
                 {"n_descriptions", 5},
                 {"n_conversations", 5},
                 {"seed", 7}};
    auto res = s.post("/forge/jobs", body);
    REQUIRE(res);
    CHECK(res->status == 202);
    auto handle = json::parse(res->body);
    std::vector<std::string> states = {handle["state"]};
    auto done = wait_for_job(s.http, handle["job_id"], &states);
    CHECK(done["state"] == "done");
    CHECK(done["stats"]["produced"] == 10);
    CHECK(done["stats"]["excluded"] == 0);

    // States only move forward.
    const std::vector<std::string> order = {"queued", "running", "done"};
    std::size_t at = 0;
    for (const auto& st : states) {
        auto it = std::find(order.begin() + static_cast<std::ptrdiff_t>(at), order.end(), st);
        CHECK(it != order.end());
        if (it != order.end()) at = static_cast<std::size_t>(it - order.begin());
    }

    // Same bytes as running the job directly.
    auto config = job_config_from_json(body);
    config.output_dir = direct.path();
    MockLlmClient mock;
    run_job(config, mock);
    fs::path out = done["output_dir"].get<std::string>();
    CHECK(read_file(out / kDescriptionsFile) == read_file(direct / kDescriptionsFile));
    CHECK(read_file(out / kConversationsFile) == read_file(direct / kConversationsFile));

    auto second = json::parse(s.post("/forge/jobs", body)->body);
    CHECK(second["job_id"] != handle["job_id"]);
    CHECK(second["output_dir"] != handle["output_dir"]);
    wait_for_job(s.http, second["job_id"]);

    CHECK(s.http.Get("/forge/jobs/j999")->status == 404);
    testing::TempDir empty;
    body["fixture_dir"] = empty.path().string();
    auto bad = s.post("/forge/jobs", body);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "config_error");
    CHECK(s.post("/forge/jobs", {{"n_descriptions", 1}, {"bogus", 1}})->status == 400);
}

TEST_CASE("forge job defaults to the registered videos") {
    testing::TempDir dir;
    Running s(test_config(dir.path()));
    s.http.Post("/videos", friends_body(), "application/json");
    auto handle = json::parse(s.post("/forge/jobs", {{"n_descriptions", 2}, {"n_conversations", 1}, {"seed", 1}})->body);
    auto done = wait_for_job(s.http, handle["job_id"]);
    CHECK(done["state"] == "done");
    CHECK(done["stats"]["produced"] == 3);
    CHECK(done["stats"]["with_replacement"] == true);
}

TEST_CASE("dataset validation endpoint") {
    testing::TempDir dir, out;
    Running s(test_config(dir.path()));
    ForgeJobConfig cfg;
    cfg.fixture_dir = testing::corpus_dir();
    cfg.n_descriptions = 2;
    cfg.output_dir = out.path();
    MockLlmClient mock;
    run_job(cfg, mock);
    std::istringstream lines(read_file(out / kDescriptionsFile));
    std::string first;
    std::getline(lines, first);
    auto rec = json::parse(first);
    std::string words;
    for (int i = 0; i < 120; ++i) words += (i ? " word" : "First,");  // keeps the adverb check quiet
    rec["text"] = words;
    auto res = s.http.Post("/datasets/validate", rec.dump() + "\n", "application/x-ndjson");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto summary = json::parse(res->body);
    CHECK(summary["records"] == 1);
    CHECK(summary["errors"] == 0);
    CHECK(summary["warnings"] == 1);
}

TEST_CASE("bearer token guards everything but liveness") {
    testing::TempDir dir;
    auto config = test_config(dir.path());
    config.service_token_env = "VCHAT_TEST_SERVICE_TOKEN";
    ::setenv("VCHAT_TEST_SERVICE_TOKEN", "s3cret", 1);
    {
        Running s(config);
        CHECK(s.http.Get("/healthz")->status == 200);
        auto denied = s.http.Get("/videos");
        CHECK(denied->status == 401);
        CHECK(json::parse(denied->body)["code"] == "unauthorized");
        CHECK(s.http.Get("/videos", {{"Authorization", "Bearer wrong"}})->status == 401);
        CHECK(s.http.Get("/videos", {{"Authorization", "Bearer s3cret"}})->status == 200);
    }
    ::unsetenv("VCHAT_TEST_SERVICE_TOKEN");
}
