// Acceptance gate: one PASS/FAIL line per primary criterion, exit 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "vchat/chat.hpp"
#include "vchat/dataset.hpp"
#include "vchat/dialogue.hpp"
#include "vchat/document.hpp"
#include "vchat/fixture.hpp"
#include "vchat/forge.hpp"
#include "vchat/job.hpp"
#include "vchat/prompt.hpp"

using namespace vchat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records the first failure only; later checks still run.
    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

// Pins computed by a separate script (hashlib) from the template wording,
// not copied from the library.
const std::vector<std::pair<TemplateId, std::string>> kTemplateSha = {
    {TemplateId::SystemChat, "559a72ee0ec27b1abbd68bc8f9f287f997da62a6bb50d1be2cf102b042ae9813"},
    {TemplateId::DetailedDescription, "abe469c5b9a46b98fe1eb3ce7f6b9bce32eec8094cb0bbb4d6923837ad8b84e7"},
    {TemplateId::PostProcess, "9bdaca0eb5b3825ca1667c012a6d3a1089467a2ef21138871b00856124464ac7"},
    {TemplateId::ConversationGen, "5c27204e39021ff4a0891e0985308e3fc504f42f7363fcf420bb1c95fdeb4ace"},
};

Outcome golden_document() {
    Outcome o;
    auto t0 = Clock::now();
    auto text = render(assemble(load_fixture(testing::friends_fixture())));
    double ms = ms_since(t0);
    o.require(contains(text, "00:00-00:02: Hey, Pheebs, you gonna have the rest of that Pop-Tart?"), "subtitle line");
    o.require(contains(text, "a woman sitting at a table: [446, 155, 710, 476]"), "dense region");
    o.require(contains(text, "answering questions, a man and a woman sitting on a couch"), "header");
    auto golden = testing::read_file(testing::test_data_dir() / "golden" / "friends_clip.txt");
    while (!golden.empty() && golden.back() == '\n') golden.pop_back();
    o.require(text == golden, "differs from golden file");
    o.require(ms < 1000.0, "too slow");
    if (o.pass) o.detail = "byte-exact, " + std::to_string(ms) + " ms < 1000 ms";
    return o;
}

Outcome template_freeze() {
    Outcome o;
    for (const auto& [id, sha] : kTemplateSha) {
        o.require(sha256_hex(builtin_template(id).body) == sha, std::string(to_string(id)) + " checksum");
    }
    auto sys = render(TemplateId::SystemChat,
                      {{"timing_interval", timing_interval(1.0)}, {"textualizing_videos", "doc"}, {"question", "q"}});
    o.require(contains(sys, "conducts conversations based on video contexts"), "SystemChat wording");
    o.require(contains(builtin_template(TemplateId::DetailedDescription).body,
                       "more than 150 words and less than 200 words"),
              "DetailedDescription wording");
    std::vector<std::size_t> sizes;
    for (auto id : {PoolId::BriefImage, PoolId::BriefVideo, PoolId::DetailedImage, PoolId::DetailedVideo}) {
        sizes.push_back(builtin_pool(id).items.size());
    }
    o.require(sizes == std::vector<std::size_t>{11, 11, 16, 16}, "pool sizes");
    if (o.pass) o.detail = "4 checksums, pools 11/11/16/16";
    return o;
}

Outcome conditioning() {
    Outcome o;
    auto catalog = std::make_shared<VideoCatalog>();
    catalog->add(load_fixture(testing::friends_fixture()));
    for (const auto& f : load_corpus(testing::corpus_dir())) catalog->add(f);
    auto ids = catalog->ids();
    WallClock clock = [] { return std::string("2024-01-01T00:00:00.000Z"); };
    auto client = std::make_shared<testing::FnClient>([](const std::string& p) { return mock_reply(p); });
    ChatOrchestrator chat(catalog, client, {}, std::nullopt, clock);
    MockLlmClient mock;
    std::mt19937_64 rng(2);
    std::size_t prompts_checked = 0;
    for (int n = 0; n < 50; ++n) {
        const auto& video = *catalog->get(ids[rng() % ids.size()]);
        std::vector<std::string> questions;
        for (int r = 0; r < 5; ++r) questions.push_back(testing::random_text(rng, 2, 8) + "?");
        auto session = chat.open_session(video.timeline.video_id);
        std::size_t first = client->prompts.size();
        for (const auto& q : questions) chat.ask(session.session_id, q);
        auto history = chat.session(session.session_id).history;
        o.require(history.size() == 5, "history length");
        for (std::size_t t = 0; t < history.size(); ++t) {
            const auto& prompt = client->prompts[first + t];
            for (std::size_t j = 0; j < t; ++j) {
                o.require(contains(prompt, history[j].question), "prior question missing");
                o.require(contains(prompt, history[j].answer), "prior answer missing");
            }
            o.require(contains(prompt, history[t].question), "current question missing");
            ++prompts_checked;
        }
        auto a = replay(questions, video, mock, {}, clock);
        auto b = replay(questions, video, mock, {}, clock);
        o.require(a == b, "replays differ");
        o.require(a == history, "replay differs from live session");
        auto bytes = [](const std::vector<ChatRound>& rounds) {
            std::string s;
            for (const auto& r : rounds) s += r.question + '\0' + r.answer + '\0' + r.model_id + '\0' + r.asked_at + '\n';
            return s;
        };
        o.require(bytes(a) == bytes(b), "replay bytes differ");
    }
    if (o.pass) o.detail = "50 sessions x 5 rounds, " + std::to_string(prompts_checked) + " prompts, replays identical";
    return o;
}

Outcome forge() {
    Outcome o;
    testing::TempDir a, b, resumed;
    MockLlmClient mock;
    auto config = [&](const fs::path& out) {
        ForgeJobConfig c;
        c.fixture_dir = testing::corpus_dir();
        c.n_descriptions = 20;
        c.n_conversations = 20;
        c.rng_state = RngState{7};
        c.output_dir = out;
        return c;
    };
    o.require(load_corpus(testing::corpus_dir()).size() == 20, "corpus is not 20 fixtures");
    auto stats = run_job(config(a.path()), mock);
    run_job(config(b.path()), mock);
    o.require(stats.produced() == 40, "produced " + std::to_string(stats.produced()));
    o.require(stats.excluded == 0, "exclusions");
    auto records = read_dataset(a / kDescriptionsFile);
    auto convs = read_dataset(a / kConversationsFile);
    records.insert(records.end(), convs.begin(), convs.end());
    o.require(records.size() == 40, "dataset size");
    bool all_valid = std::all_of(records.begin(), records.end(), [](const auto& r) { return validate(r).ok(); });
    o.require(all_valid, "schema-invalid record emitted");
    for (const char* f : {kDescriptionsFile, kConversationsFile}) {
        o.require(testing::read_file(a / f) == testing::read_file(b / f), std::string(f) + " differs across runs");
    }

    // Injected faults against the validator.
    auto desc = std::get<DescriptionRecord>(read_dataset(a / kDescriptionsFile).front());
    desc.text = "First,";
    for (int i = 1; i < 120; ++i) desc.text += " word";
    auto dr = validate_description(desc);
    o.require(dr.errors.empty() && dr.warnings.size() == 1, "120-word description is not exactly one warning");
    auto conv = std::get<ConversationRecord>(convs.front());
    conv.turns.turns.resize(2);
    auto cr = validate_conversation(conv);
    o.require(cr.errors.size() == 1, "single-round conversation is not exactly one error");

    // Interrupted then resumed.
    auto c = config(resumed.path());
    c.stop_after = 10;
    auto first = run_job(c, mock);
    o.require(first.interrupted, "stop_after did not interrupt");
    c.stop_after.reset();
    run_job(c, mock);
    for (const char* f : {kDescriptionsFile, kConversationsFile}) {
        o.require(testing::read_file(a / f) == testing::read_file(resumed / f), std::string(f) + " differs after resume");
    }
    if (o.pass) o.detail = "40 valid, 0 excluded, reruns and resume byte-identical, 1 warning / 1 error injected";
    return o;
}

Outcome bijection() {
    Outcome o;
    std::mt19937_64 rng(500);
    std::vector<bool> seen(17, false);
    for (int n = 0; n < 500; ++n) {
        DialogueScript s;
        s.media.kind = MediaKind::Video;
        int frames = 1 + static_cast<int>(n % 16);
        int tenths = static_cast<int>(rng() % 5);
        for (int i = 0; i < frames; ++i) {
            s.media.frame_times.emplace_back(tenths / 10.0);
            tenths += 1 + static_cast<int>(rng() % 30);
        }
        int turns = 1 + static_cast<int>(rng() % 10);
        for (int i = 0; i < turns; ++i) {
            s.turns.push_back({i % 2 == 0 ? Role::Human : Role::Assistant, testing::random_text(rng, 1, 12)});
        }
        auto text = serialize_dialogue(s);
        o.require(contains(text, "The video contains " + std::to_string(frames) + " frames sampled at "),
                  "frame sentence");
        auto back = parse_dialogue(text);
        o.require(back == s, "parse(serialize(s)) != s");
        o.require(serialize_dialogue(back) == text, "serialize(parse(t)) != t");
        seen[static_cast<std::size_t>(frames)] = true;
    }
    o.require(std::count(seen.begin() + 1, seen.end(), true) == 16, "T range not covered");
    if (o.pass) o.detail = "500 scripts, T in 1..16";
    return o;
}

Outcome latency() {
    Outcome o;
    std::mt19937_64 rng(60);
    std::vector<PerceptionRecord> records;
    for (int t = 0; t + 4 <= 60; t += 4) {
        PerceptionRecord r;
        r.kind = RecordKind::Subtitle;
        r.span = {Timecode(t), Timecode(t + 3)};
        r.text = testing::random_text(rng, 4, 10);
        r.source_model = "whisper";
        records.push_back(r);
    }
    while (records.size() < 60) {
        auto r = testing::random_record(rng, 60);
        if (r.kind != RecordKind::Subtitle) records.push_back(r);
    }
    auto tl = with_records(make_timeline("latency", 60, 1), records);
    o.require(tl.records.size() >= 55, "timeline lost records");
    std::vector<double> runs;
    for (int i = 0; i < 20; ++i) {
        auto t0 = Clock::now();
        auto text = render(assemble(tl));
        runs.push_back(ms_since(t0));
        o.require(!text.empty(), "empty render");
    }
    double worst = *std::max_element(runs.begin(), runs.end());
    o.require(worst < 50.0, "worst run " + std::to_string(worst) + " ms");
    if (o.pass) o.detail = std::to_string(tl.records.size()) + " records, worst of 20 runs " + std::to_string(worst) + " ms < 50 ms";
    return o;
}

Outcome mixture() {
    Outcome o;
    auto counts = mix_counts(0.01);
    std::vector<std::size_t> got;
    for (const auto& s : stage2_sources()) got.push_back(counts.at(s.name));
    o.require(got == std::vector<std::size_t>{70, 40, 30, 20, 20}, "per-source counts");

    testing::TempDir dir;
    std::map<std::string, fs::path> inputs;
    for (const auto& s : stage2_sources()) {
        std::string body;
        for (int i = 0; i < 100; ++i) body += nlohmann::json{{"i", i}}.dump() + "\n";
        inputs[s.name] = dir / (s.name + ".jsonl");
        testing::write_file(inputs[s.name], body);
    }
    auto stats = mix_stage2(inputs, 0.01, RngState{1}, dir / "mix.jsonl");
    auto text = testing::read_file(dir / "mix.jsonl");
    auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    o.require(stats.total == 180 && lines == 180, "total " + std::to_string(lines));
    if (o.pass) o.detail = "70/40/30/20/20 = 180";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"golden document", golden_document},
        {"template freeze", template_freeze},
        {"history conditioning", conditioning},
        {"forge determinism and validation", forge},
        {"serialization bijection", bijection},
        {"orchestration latency", latency},
        {"mixture arithmetic", mixture},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %-34s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed ? 1 : 0;
}
