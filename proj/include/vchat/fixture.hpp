#pragma once

// Wire and file shapes for perception records and fixture bundles.
//
// Record shape (adapter responses and fixtures alike):
//   { kind, start_s, end_s, text, regions?: [{label, bbox: [x1, y1, x2, y2]}],
//     confidence?, source_model? }
//
// Fixture bundle, one per file:
//   { video_id, duration_s, fps, video_class?, video_caption?, records: [...] }
// Unknown fields are rejected. video_class / video_caption become whole-video
// records attributed to kFixtureSource.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "vchat/timeline.hpp"

namespace vchat {

inline constexpr const char* kFixtureSource = "fixture";

nlohmann::json record_to_json(const PerceptionRecord& record, bool include_source = true);

/// Parses one record. `strict` rejects unknown fields. When the object has no
/// source_model, `default_source` is used. Throws Error(Parse).
PerceptionRecord record_from_json(const nlohmann::json& j, const std::string& default_source,
                                  bool strict);

nlohmann::json fixture_to_json(const VideoTimeline& timeline);

/// Throws Error(Parse) naming the offending entry for schema or invariant
/// violations.
VideoTimeline fixture_from_json(const nlohmann::json& j);

VideoTimeline load_fixture(const std::filesystem::path& path);
void save_fixture(const VideoTimeline& timeline, const std::filesystem::path& path);

}  // namespace vchat
