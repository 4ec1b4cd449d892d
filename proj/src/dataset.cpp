#include "vchat/dataset.hpp"

#include <fstream>

#include "vchat/error.hpp"
#include "vchat/prompt.hpp"

namespace vchat {

using nlohmann::json;

namespace {

json provenance_json(const Provenance& p) {
    return {{"prompt_ids", p.prompt_ids},
            {"model_id", p.model_id},
            {"rng_state", to_hex(p.rng_state)},
            {"wall_time", p.wall_time}};
}

json times_json(const std::vector<Timecode>& times) {
    json out = json::array();
    for (auto t : times) out.push_back(t.seconds());
    return out;
}

// Accessors that name the offending field.
const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) fail(ErrorCode::Parse, std::string("missing field '") + name + "'");
    return *it;
}

std::string string_field(const json& j, const char* name, bool non_empty = false) {
    const auto& v = field(j, name);
    if (!v.is_string()) fail(ErrorCode::Parse, std::string("field '") + name + "' must be a string");
    auto s = v.get<std::string>();
    if (non_empty && s.empty()) fail(ErrorCode::Parse, std::string("field '") + name + "' is empty");
    return s;
}

void only_fields(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) fail(ErrorCode::Parse, std::string("unknown ") + what + " field '" + key + "'");
    }
}

std::vector<Timecode> times_from(const json& j) {
    const auto& v = field(j, "frame_times");
    if (!v.is_array()) fail(ErrorCode::Parse, "field 'frame_times' must be an array");
    std::vector<Timecode> out;
    for (const auto& t : v) {
        if (!t.is_number()) fail(ErrorCode::Parse, "frame time must be a number");
        try {
            out.emplace_back(t.get<double>());
        } catch (const Error& e) {
            fail(ErrorCode::Parse, std::string("frame time: ") + e.what());
        }
    }
    return out;
}

Provenance provenance_from(const json& j) {
    const auto& p = field(j, "provenance");
    if (!p.is_object()) fail(ErrorCode::Parse, "field 'provenance' must be an object");
    only_fields(p, {"prompt_ids", "model_id", "rng_state", "wall_time"}, "provenance");
    Provenance out;
    const auto& ids = field(p, "prompt_ids");
    if (!ids.is_array() || ids.empty()) fail(ErrorCode::Parse, "field 'prompt_ids' must be a non-empty array");
    for (const auto& id : ids) {
        if (!id.is_string()) fail(ErrorCode::Parse, "prompt id must be a string");
        out.prompt_ids.push_back(id.get<std::string>());
        (void)parse_template_id(out.prompt_ids.back());
    }
    out.model_id = string_field(p, "model_id", true);
    try {
        out.rng_state = rng_from_hex(string_field(p, "rng_state"));
    } catch (const Error& e) {
        fail(ErrorCode::Parse, std::string("rng_state: ") + e.what());
    }
    out.wall_time = string_field(p, "wall_time");
    return out;
}

}  // namespace

json to_json(const DescriptionRecord& r) {
    return {{"type", "description"},
            {"video_id", r.video_id},
            {"instruction", r.instruction},
            {"text", r.text},
            {"frame_times", times_json(r.frame_times)},
            {"provenance", provenance_json(r.provenance)}};
}

json to_json(const ConversationRecord& r) {
    json turns = json::array();
    for (const auto& t : r.turns.turns) turns.push_back({{"role", std::string(to_string(t.role))}, {"text", t.text}});
    return {{"type", "conversation"},
            {"video_id", r.video_id},
            {"turns", std::move(turns)},
            {"frame_times", times_json(r.turns.media.frame_times)},
            {"category_tags", r.category_tags},
            {"provenance", provenance_json(r.provenance)}};
}

json to_json(const DatasetRecord& record) {
    return std::visit([](const auto& r) { return to_json(r); }, record);
}

DatasetRecord dataset_record_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Parse, "record must be a JSON object");
    auto type = string_field(j, "type");
    if (type == "description") {
        only_fields(j, {"type", "video_id", "instruction", "text", "frame_times", "provenance"}, "description");
        DescriptionRecord r;
        r.video_id = string_field(j, "video_id", true);
        r.instruction = string_field(j, "instruction");
        r.text = string_field(j, "text");
        r.frame_times = times_from(j);
        r.provenance = provenance_from(j);
        return r;
    }
    if (type == "conversation") {
        only_fields(j, {"type", "video_id", "turns", "frame_times", "category_tags", "provenance"},
                    "conversation");
        ConversationRecord r;
        r.video_id = string_field(j, "video_id", true);
        const auto& turns = field(j, "turns");
        if (!turns.is_array()) fail(ErrorCode::Parse, "field 'turns' must be an array");
        for (const auto& t : turns) {
            if (!t.is_object()) fail(ErrorCode::Parse, "turn must be an object");
            only_fields(t, {"role", "text"}, "turn");
            r.turns.turns.push_back({parse_role(string_field(t, "role")), string_field(t, "text")});
        }
        r.turns.media.kind = MediaKind::Video;
        r.turns.media.frame_times = times_from(j);
        if (auto it = j.find("category_tags"); it != j.end()) {
            if (!it->is_array()) fail(ErrorCode::Parse, "field 'category_tags' must be an array");
            for (const auto& tag : *it) {
                if (!tag.is_string()) fail(ErrorCode::Parse, "category tag must be a string");
                auto s = tag.get<std::string>();
                if (s != kCategoryDescriptive && s != kCategoryTemporal && s != kCategoryCausal) {
                    fail(ErrorCode::Parse, "unknown category tag '" + s + "'");
                }
                r.category_tags.insert(s);
            }
        }
        r.provenance = provenance_from(j);
        return r;
    }
    fail(ErrorCode::Parse, "unknown record type '" + type + "'");
}

std::string to_jsonl_line(const DatasetRecord& record) { return to_json(record).dump() + "\n"; }

void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& r : records) out << to_jsonl_line(r);
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::vector<DatasetRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            out.push_back(dataset_record_from_json(j));
        } catch (const json::exception& e) {
            fail(ErrorCode::Parse, path.string() + ": line " + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorCode::Parse, path.string() + ": line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

ValidationReport validate(const DatasetRecord& record) {
    return std::visit(
        [](const auto& r) {
            if constexpr (std::is_same_v<std::decay_t<decltype(r)>, DescriptionRecord>) {
                return validate_description(r);
            } else {
                return validate_conversation(r);
            }
        },
        record);
}

DatasetSummary validate_dataset(std::istream& in) {
    DatasetSummary summary;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++summary.records;
        LineReport lr{n, {}};
        try {
            lr.report = validate(dataset_record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            lr.report.record_id = "line/" + std::to_string(n);
            lr.report.errors.push_back(std::string("schema: ") + e.what());
        } catch (const Error& e) {
            lr.report.record_id = "line/" + std::to_string(n);
            lr.report.errors.push_back(std::string("schema: ") + e.what());
        }
        summary.errors += lr.report.errors.size();
        summary.warnings += lr.report.warnings.size();
        if (!lr.report.errors.empty() || !lr.report.warnings.empty()) summary.reports.push_back(std::move(lr));
    }
    return summary;
}

json summary_to_json(const DatasetSummary& s) {
    json reports = json::array();
    for (const auto& lr : s.reports) {
        reports.push_back({{"line", lr.line},
                           {"record_id", lr.report.record_id},
                           {"errors", lr.report.errors},
                           {"warnings", lr.report.warnings}});
    }
    return {{"records", s.records}, {"errors", s.errors}, {"warnings", s.warnings}, {"reports", std::move(reports)}};
}

std::string format_summary(const DatasetSummary& s) {
    std::string out;
    for (const auto& lr : s.reports) {
        auto prefix = "line " + std::to_string(lr.line) + " " + lr.report.record_id + ": ";
        for (const auto& e : lr.report.errors) out += prefix + "error " + e + "\n";
        for (const auto& w : lr.report.warnings) out += prefix + "warning " + w + "\n";
    }
    out += "records: " + std::to_string(s.records) + ", errors: " + std::to_string(s.errors) +
           ", warnings: " + std::to_string(s.warnings) + "\n";
    return out;
}

}  // namespace vchat
