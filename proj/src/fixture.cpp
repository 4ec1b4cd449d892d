#include "vchat/fixture.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vchat/error.hpp"

namespace vchat {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) {
            fail(ErrorCode::Parse, where + ": unknown field '" + key + "'");
        }
    }
}

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) fail(ErrorCode::Parse, where + ": missing field '" + key + "'");
    return *it;
}

double require_number(const json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number()) fail(ErrorCode::Parse, where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

std::string require_string(const json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_string()) fail(ErrorCode::Parse, where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

Region region_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) fail(ErrorCode::Parse, where + ": region must be an object");
    reject_unknown(j, {"label", "bbox"}, where);
    Region r;
    r.label = require_string(j, "label", where);
    const auto& bbox = require(j, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) {
        fail(ErrorCode::Parse, where + ": bbox must hold four integers");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (!bbox[i].is_number_integer()) {
            fail(ErrorCode::Parse, where + ": bbox must hold four integers");
        }
        r.bbox[i] = bbox[i].get<int>();
    }
    return r;
}

}  // namespace

json record_to_json(const PerceptionRecord& record, bool include_source) {
    json j{{"kind", to_string(record.kind)},
           {"start_s", record.span.start.seconds()},
           {"end_s", record.span.end.seconds()},
           {"text", record.text}};
    if (!record.regions.empty()) {
        json regions = json::array();
        for (const auto& r : record.regions) {
            regions.push_back({{"label", r.label}, {"bbox", r.bbox}});
        }
        j["regions"] = std::move(regions);
    }
    if (record.confidence) j["confidence"] = *record.confidence;
    if (include_source) j["source_model"] = record.source_model;
    return j;
}

PerceptionRecord record_from_json(const json& j, const std::string& default_source, bool strict) {
    const std::string where = "record";
    if (!j.is_object()) fail(ErrorCode::Parse, "record must be an object");
    if (strict) {
        reject_unknown(j, {"kind", "start_s", "end_s", "text", "regions", "confidence", "source_model"},
                       where);
    }
    PerceptionRecord r;
    r.kind = parse_record_kind(require_string(j, "kind", where));
    double start = require_number(j, "start_s", where);
    double end = require_number(j, "end_s", where);
    if (!(start >= 0.0) || !(end >= 0.0)) fail(ErrorCode::Parse, "record: negative time");
    r.span = {Timecode(start), Timecode(end)};
    r.text = require_string(j, "text", where);
    if (auto it = j.find("regions"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) fail(ErrorCode::Parse, "record: regions must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            r.regions.push_back(region_from_json((*it)[i], "regions[" + std::to_string(i) + "]"));
        }
    }
    if (auto it = j.find("confidence"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) fail(ErrorCode::Parse, "record: confidence must be a number");
        r.confidence = it->get<double>();
    }
    r.source_model = default_source;
    if (auto it = j.find("source_model"); it != j.end()) {
        if (!it->is_string()) fail(ErrorCode::Parse, "record: source_model must be a string");
        r.source_model = it->get<std::string>();
    }
    if (auto why = record_violation(r)) fail(ErrorCode::Parse, "record: " + *why);
    return r;
}

json fixture_to_json(const VideoTimeline& timeline) {
    json j{{"video_id", timeline.video_id},
           {"duration_s", timeline.duration_s},
           {"fps", timeline.fps}};

    // Header records attributed to the fixture itself collapse back into the
    // top-level fields; anything else stays in the record list.
    auto header_slot = [&](RecordKind kind) -> const PerceptionRecord* {
        const PerceptionRecord* found = nullptr;
        for (const auto& r : timeline.records) {
            if (r.kind != kind) continue;
            if (found || r.source_model != kFixtureSource || r.confidence) return nullptr;
            found = &r;
        }
        return found;
    };
    const auto* cls = header_slot(RecordKind::VideoClass);
    const auto* cap = header_slot(RecordKind::VideoCaption);
    if (cls) j["video_class"] = cls->text;
    if (cap) j["video_caption"] = cap->text;

    json records = json::array();
    for (const auto& r : timeline.records) {
        if (&r == cls || &r == cap) continue;
        records.push_back(record_to_json(r));
    }
    j["records"] = std::move(records);
    return j;
}

VideoTimeline fixture_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Parse, "fixture: document must be an object");
    reject_unknown(j, {"video_id", "duration_s", "fps", "video_class", "video_caption", "records"},
                   "fixture");
    auto video_id = require_string(j, "video_id", "fixture");
    if (video_id.empty()) fail(ErrorCode::Parse, "fixture: video_id is empty");
    double duration = require_number(j, "duration_s", "fixture");
    double fps = require_number(j, "fps", "fixture");
    if (!(duration > 0.0) || !(fps > 0.0)) {
        fail(ErrorCode::Parse, "fixture: duration_s and fps must be positive");
    }
    auto timeline = make_timeline(video_id, duration, fps);

    std::vector<PerceptionRecord> records;
    auto header = [&](const char* key, RecordKind kind) {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return;
        if (!it->is_string()) fail(ErrorCode::Parse, std::string("fixture: '") + key + "' must be a string");
        PerceptionRecord r;
        r.kind = kind;
        r.span = {Timecode(0.0), Timecode(duration)};
        r.text = it->get<std::string>();
        r.source_model = kFixtureSource;
        if (auto why = record_violation(r)) fail(ErrorCode::Parse, std::string("fixture: ") + key + ": " + *why);
        records.push_back(std::move(r));
    };
    header("video_class", RecordKind::VideoClass);
    header("video_caption", RecordKind::VideoCaption);

    const auto& list = require(j, "records", "fixture");
    if (!list.is_array()) fail(ErrorCode::Parse, "fixture: records must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "fixture: records[" + std::to_string(i) + "]";
        PerceptionRecord r;
        try {
            r = record_from_json(list[i], kFixtureSource, true);
            (void)insert_record(timeline, r);  // range checks only
        } catch (const Error& e) {
            fail(ErrorCode::Parse, where + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    try {
        return with_records(make_timeline(video_id, duration, fps), std::move(records));
    } catch (const Error& e) {
        fail(ErrorCode::Parse, std::string("fixture: ") + e.what());
    }
}

VideoTimeline load_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Parse, "fixture: cannot open '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Parse, "fixture '" + path.string() + "': " + e.what());
    }
    try {
        return fixture_from_json(j);
    } catch (const Error& e) {
        fail(ErrorCode::Parse, path.filename().string() + ": " + e.what());
    }
}

void save_fixture(const VideoTimeline& timeline, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << fixture_to_json(timeline).dump(2) << '\n';
}

}  // namespace vchat
