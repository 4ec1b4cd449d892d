#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "vchat/fixture.hpp"

using namespace vchat;
using nlohmann::json;
using testing::error_code;

namespace {

json minimal() {
    return json{{"video_id", "v"}, {"duration_s", 10}, {"fps", 1}, {"records", json::array()}};
}

}  // namespace

TEST_CASE("friends fixture loads") {
    auto tl = load_fixture(testing::friends_fixture());
    CHECK(tl.video_id == "friends_clip");
    CHECK(tl.duration_s == 11.0);
    CHECK(tl.frame_times.size() == 11);
    // 2 header records, 11 clip captions, 3 dense windows, 4 subtitles.
    CHECK(tl.records.size() == 20);
    int dense = 0;
    for (const auto& r : tl.records) {
        if (r.kind != RecordKind::DenseCaption) continue;
        ++dense;
        REQUIRE(r.regions.size() == 13);
        CHECK(r.regions[1].label == "man wearing a plaid shirt");
        CHECK(r.regions[1].bbox == std::array<int, 4>{361, 44, 581, 337});
    }
    CHECK(dense == 3);
    validate_timeline(tl);
}

TEST_CASE("minimal fixture has no records") {
    auto tl = fixture_from_json(minimal());
    CHECK(tl.records.empty());
    CHECK(tl.frame_times.size() == 10);
}

TEST_CASE("fixture round-trips through save and load") {
    testing::TempDir dir;
    auto tl = load_fixture(testing::friends_fixture());
    save_fixture(tl, dir / "f.json");
    CHECK(load_fixture(dir / "f.json") == tl);
    CHECK(fixture_from_json(fixture_to_json(tl)) == tl);
}

TEST_CASE("property: random timelines round-trip") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        int duration = 1 + static_cast<int>(rng() % 40);
        auto tl = make_timeline("rt" + std::to_string(trial), duration, 1.0);
        std::vector<PerceptionRecord> records;
        int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) records.push_back(testing::random_record(rng, duration));
        if (rng() % 2) {
            PerceptionRecord cap;
            cap.kind = RecordKind::VideoCaption;
            cap.span = {Timecode(0), Timecode(duration)};
            cap.text = testing::random_text(rng);
            cap.source_model = kFixtureSource;
            records.push_back(cap);
        }
        tl = with_records(tl, records);
        auto text = fixture_to_json(tl).dump();
        CHECK(fixture_from_json(json::parse(text)) == tl);
    }
}

TEST_CASE("fixture schema violations are parse errors") {
    auto j = minimal();
    j["extra"] = 1;
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);

    j = minimal();
    j.erase("video_id");
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);

    j = minimal();
    j["fps"] = 0;
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);

    j = minimal();
    j["records"] = json::array({{{"kind", "ClipCaption"}, {"start_s", 0}, {"end_s", 1}, {"text", "x"}, {"bogus", 1}}});
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);

    j = minimal();
    j["records"] = json::array({{{"kind", "Nope"}, {"start_s", 0}, {"end_s", 1}, {"text", "x"}}});
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);

    j = minimal();
    j["records"] = json::array({{{"kind", "ClipCaption"}, {"start_s", 0}, {"end_s", 30}, {"text", "x"}}});
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);
}

TEST_CASE("bbox with x1 > x2 names the offending record") {
    auto j = minimal();
    j["records"] = json::array({
        {{"kind", "ClipCaption"}, {"start_s", 0}, {"end_s", 1}, {"text", "fine"}},
        {{"kind", "DenseCaption"},
         {"start_s", 0},
         {"end_s", 5},
         {"text", "dense regions"},
         {"regions", json::array({{{"label", "flipped"}, {"bbox", {500, 10, 400, 20}}}})}},
    });
    try {
        fixture_from_json(j);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
        CHECK(std::string(e.what()).find("records[1]") != std::string::npos);
    }

    j["records"][1]["regions"][0]["bbox"] = {1, 2, 3};
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);
    j["records"][1]["regions"][0]["bbox"] = {1.5, 2, 3, 4};
    CHECK(error_code([&] { fixture_from_json(j); }) == ErrorCode::Parse);
}

TEST_CASE("load_fixture reports missing and malformed files") {
    testing::TempDir dir;
    CHECK(error_code([&] { load_fixture(dir / "absent.json"); }) == ErrorCode::Parse);
    testing::write_file(dir / "bad.json", "{not json");
    CHECK(error_code([&] { load_fixture(dir / "bad.json"); }) == ErrorCode::Parse);
}

TEST_CASE("record_from_json defaults the source and tolerates extras when lenient") {
    json j{{"kind", "Subtitle"}, {"start_s", 1}, {"end_s", 2}, {"text", "hi"}, {"extra", true}};
    auto r = record_from_json(j, "whisper", false);
    CHECK(r.source_model == "whisper");
    CHECK(r.kind == RecordKind::Subtitle);
    CHECK(error_code([&] { record_from_json(j, "whisper", true); }) == ErrorCode::Parse);
    j["start_s"] = -1;
    CHECK(error_code([&] { record_from_json(j, "whisper", false); }) == ErrorCode::Parse);
}

TEST_CASE("corpus fixtures all load") {
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(testing::corpus_dir())) {
        auto tl = load_fixture(entry.path());
        validate_timeline(tl);
        ++n;
    }
    CHECK(n == 20);
}
