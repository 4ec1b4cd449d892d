#pragma once

// JSONL datasets of forged records, one record per line:
//   {"type":"description", "video_id", "instruction", "text", "frame_times", "provenance"}
//   {"type":"conversation", "video_id", "turns":[{"role","text"}], "frame_times",
//    "category_tags", "provenance"}
// provenance = {"prompt_ids", "model_id", "rng_state" (16 hex digits), "wall_time"}

#include <filesystem>
#include <istream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchat/forge.hpp"

namespace vchat {

using DatasetRecord = std::variant<DescriptionRecord, ConversationRecord>;

nlohmann::json to_json(const DescriptionRecord& record);
nlohmann::json to_json(const ConversationRecord& record);
nlohmann::json to_json(const DatasetRecord& record);

/// Throws Error(Parse) describing the first schema violation.
DatasetRecord dataset_record_from_json(const nlohmann::json& j);

std::string to_jsonl_line(const DatasetRecord& record);

void write_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& path);

/// Throws Error(Parse) "<path>: line N: ..." on the first bad line; Io when the
/// file cannot be opened. Blank lines are skipped.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

ValidationReport validate(const DatasetRecord& record);

struct LineReport {
    std::size_t line = 0;
    ValidationReport report;
};

/// Per-line validation of a JSONL stream. Schema violations count as errors
/// on their line instead of stopping the scan.
struct DatasetSummary {
    std::size_t records = 0;
    std::size_t errors = 0;
    std::size_t warnings = 0;
    std::vector<LineReport> reports;  // only lines with errors or warnings
};

DatasetSummary validate_dataset(std::istream& in);
nlohmann::json summary_to_json(const DatasetSummary& summary);
/// One line per finding, then "records: R, errors: E, warnings: W".
std::string format_summary(const DatasetSummary& summary);

}  // namespace vchat
