#include <doctest.h>

#include <sstream>

#include <httplib.h>

#include "test_support.hpp"
#include "vchat/cli.hpp"
#include "vchat/job.hpp"
#include "vchat/service.hpp"

using namespace vchat;
using nlohmann::json;
using testing::read_file;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(const std::vector<std::string>& args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string golden() { return read_file(testing::test_data_dir() / "golden" / "friends_clip.txt"); }

fs::path description_with_words(const testing::TempDir& dir, int words) {
    ForgeJobConfig cfg;
    cfg.fixture_dir = testing::corpus_dir();
    cfg.n_descriptions = 1;
    cfg.output_dir = dir / "src";
    MockLlmClient mock;
    run_job(cfg, mock);
    auto rec = json::parse(read_file(cfg.output_dir / kDescriptionsFile));
    std::string text = "First,";
    for (int i = 1; i < words; ++i) text += " word";
    rec["text"] = text;
    auto path = dir / "one.jsonl";
    testing::write_file(path, rec.dump() + "\n");
    return path;
}

}  // namespace

TEST_CASE("textualize prints the canonical document") {
    auto r = cli({"textualize", testing::friends_fixture().string()});
    CHECK(r.code == 0);
    auto expected = golden();
    while (!expected.empty() && expected.back() == '\n') expected.pop_back();
    CHECK(r.out == expected + "\n");
    CHECK(r.out.find("00:00-00:02: Hey, Pheebs, you gonna have the rest of that Pop-Tart?") != std::string::npos);

    auto cut = cli({"textualize", testing::friends_fixture().string(), "--max-chars", "250"});
    CHECK(cut.code == 0);
    CHECK(cut.out.size() <= 251);
}

TEST_CASE("textualize of a fixture without records prints the header only") {
    testing::TempDir dir;
    auto j = json::parse(read_file(testing::friends_fixture()));
    j["records"] = json::array();
    testing::write_file(dir / "bare.json", j.dump());
    auto r = cli({"textualize", (dir / "bare.json").string()});
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
    CHECK(r.out.find("a man and a woman sitting on a couch") != std::string::npos);
}

TEST_CASE("validate: one 120-word description is a warning, not an error") {
    testing::TempDir dir;
    auto r = cli({"validate", description_with_words(dir, 120).string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("records: 1, errors: 0, warnings: 1") != std::string::npos);
    CHECK(r.out.find("word_count_out_of_range") != std::string::npos);

    testing::write_file(dir / "broken.jsonl", "{\"type\":\"description\"}\n");
    auto bad = cli({"validate", (dir / "broken.jsonl").string()});
    CHECK(bad.code == 1);
    CHECK(cli({"validate", (dir / "absent.jsonl").string()}).code == 2);
}

TEST_CASE("forge with the same seed twice writes identical files") {
    testing::TempDir dir;
    for (const char* out : {"a", "b"}) {
        auto r = cli({"forge", "describe", "--fixtures", testing::corpus_dir().string(), "--n", "6", "--seed", "7",
                      "--mock", "--out", (dir / out).string()});
        CHECK(r.code == 0);
        CHECK(json::parse(r.out)["produced"] == 6);
    }
    CHECK(read_file(dir / "a" / kDescriptionsFile) == read_file(dir / "b" / kDescriptionsFile));
    CHECK(!read_file(dir / "a" / kDescriptionsFile).empty());

    auto conv = cli({"forge", "converse", "--fixtures", testing::corpus_dir().string(), "--n", "3", "--seed", "7",
                     "--mock", "--out", (dir / "c").string()});
    CHECK(conv.code == 0);
    CHECK(json::parse(conv.out)["produced"] == 3);
}

TEST_CASE("usage and runtime failures exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"forge", "describe", "--fixtures", "x", "--n", "1"}).code == 2);  // no seed
    auto r = cli({"forge", "describe", "--fixtures", "/nonexistent", "--n", "1", "--seed", "1", "--mock"});
    CHECK(r.code == 2);
    CHECK(r.err.find("config_error") != std::string::npos);
    CHECK(cli({"textualize", "/nonexistent.json"}).code == 2);
    auto no_client = cli({"forge", "describe", "--fixtures", testing::corpus_dir().string(), "--n", "1", "--seed", "1"});
    CHECK(no_client.code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("chat reads one question per line") {
    auto r = cli({"chat", testing::friends_fixture().string(), "--mock"}, "What is she eating?\n\nWho else?\n/quit\nignored\n");
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
    CHECK(r.err.find("session") != std::string::npos);
}

TEST_CASE("mix and templates") {
    testing::TempDir dir;
    std::vector<std::string> args = {"mix", "--scale", "0.01", "--seed", "3", "--out", (dir / "mix.jsonl").string()};
    for (const auto& s : stage2_sources()) {
        auto p = dir / (s.name + ".jsonl");
        std::string body;
        for (int i = 0; i < 80; ++i) body += json{{"n", i}}.dump() + "\n";
        testing::write_file(p, body);
        auto flag = "--" + s.name;
        std::replace(flag.begin(), flag.end(), '_', '-');
        args.push_back(flag);
        args.push_back(p.string());
    }
    auto r = cli(args);
    CHECK(r.code == 0);
    CHECK(r.out.find("total: 180") != std::string::npos);

    auto t = cli({"templates", (dir / "tpl").string()});
    CHECK(t.code == 0);
    CHECK(fs::exists(dir / "tpl"));
    CHECK_FALSE(fs::is_empty(dir / "tpl"));
}

// The same scripted scenario through both front ends must agree.
TEST_CASE("cli and http parity") {
    testing::TempDir dir;
    ServiceConfig config;
    config.listen_port = 0;
    config.data_dir = dir / "state";
    config.service_token_env = "VCHAT_TEST_TOKEN_UNSET";
    Service service(config);
    int port = service.start();
    httplib::Client http("127.0.0.1", port);
    http.set_read_timeout(60, 0);

    auto fixture = read_file(testing::friends_fixture());
    std::string vid = json::parse(fixture)["video_id"];
    REQUIRE(http.Post("/videos", fixture, "application/json")->status == 201);

    // textualize == GET document
    auto doc = http.Get("/videos/" + vid + "/document")->body;
    CHECK(cli({"textualize", testing::friends_fixture().string()}).out == doc + "\n");
    auto cut = http.Get("/videos/" + vid + "/document?max_chars=400")->body;
    CHECK(cli({"textualize", testing::friends_fixture().string(), "--max-chars", "400"}).out == cut + "\n");

    // chat == session messages
    const std::vector<std::string> questions = {"What is the woman holding?", "Where are they sitting?",
                                                "What does the man say?"};
    std::string script;
    for (const auto& q : questions) script += q + "\n";
    auto chat = cli({"chat", testing::friends_fixture().string(), "--mock"}, script);
    std::string sid = json::parse(http.Post("/sessions", json{{"video_id", vid}}.dump(), "application/json")->body)
                          ["session_id"];
    std::string http_answers;
    for (const auto& q : questions) {
        http.Post("/sessions/" + sid + "/messages", json{{"question", q}}.dump(), "application/json");
    }
    auto session = json::parse(http.Get("/sessions/" + sid)->body);
    for (const auto& round : session["history"]) {
        http_answers += round["answer"].get<std::string>() + "\n";
    }
    CHECK(chat.out == http_answers);

    // forge == forge job
    auto forged = cli({"forge", "converse", "--fixtures", testing::corpus_dir().string(), "--n", "4", "--seed", "11",
                       "--mock", "--out", (dir / "cli_out").string()});
    REQUIRE(forged.code == 0);
    json body = {{"fixture_dir", testing::corpus_dir().string()}, {"n_conversations", 4}, {"seed", 11}};
    std::string job = json::parse(http.Post("/forge/jobs", body.dump(), "application/json")->body)["job_id"];
    auto handle = service.jobs().wait(job);
    CHECK(handle.state == JobState::Done);
    CHECK(read_file(handle.output_dir / kConversationsFile) == read_file(dir / "cli_out" / kConversationsFile));

    // validate == POST /datasets/validate
    auto path = description_with_words(dir, 120);
    auto summary = json::parse(http.Post("/datasets/validate", read_file(path), "application/x-ndjson")->body);
    auto v = cli({"validate", path.string()});
    auto line = "records: " + summary["records"].dump() + ", errors: " + summary["errors"].dump() +
                ", warnings: " + summary["warnings"].dump();
    CHECK(v.out.find(line) != std::string::npos);
    service.stop();
}
