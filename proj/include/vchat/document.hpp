#pragma once

// The textualized video: a timeline consolidated into the plain-text document
// an LLM reads in place of the video.
//
// Canonical grammar (UTF-8, lines joined by '\n', no trailing newline):
//   line 1:    <video_class>, <video_caption>
//   captions:  <MM:SS>-<MM:SS> <merged caption text>
//   dense:     <MM:SS>-<MM:SS> <label>: [<x1>, <y1>, <x2>, <y2>]; ...   (each entry ends "; ")
//   subtitles: <MM:SS>-<MM:SS>: <text>
// Sections always appear in that order.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vchat/timeline.hpp"

namespace vchat {

struct AssemblyPolicy {
    double dense_cadence_s = 5.0;
    bool merge_identical_adjacent = true;
    std::optional<std::size_t> max_render_chars;  // nullopt = unlimited
    std::vector<RecordKind> drop_priority = {RecordKind::DenseCaption, RecordKind::ClipTag,
                                             RecordKind::ActionLabel, RecordKind::ClipCaption,
                                             RecordKind::Subtitle};

    bool operator==(const AssemblyPolicy&) const = default;
};

/// Throws InvalidArgument unless drop_priority is a permutation of the five
/// droppable kinds and the cadence is positive.
void validate_policy(const AssemblyPolicy& policy);

struct DocumentHeader {
    std::string video_class;
    std::string video_caption;

    bool operator==(const DocumentHeader&) const = default;
};

struct CaptionLine {
    Window window;
    std::string text;
    std::vector<std::size_t> sources;  // indices into TextualizedVideo::timeline.records

    bool operator==(const CaptionLine&) const = default;
};

struct DenseLine {
    Window window;
    std::vector<std::string> entries;  // "label: [x1, y1, x2, y2]"
    std::vector<std::size_t> sources;

    bool operator==(const DenseLine&) const = default;
};

struct SubtitleLine {
    Window window;
    std::string text;
    std::vector<std::size_t> sources;

    bool operator==(const SubtitleLine&) const = default;
};

struct TextualizedVideo {
    DocumentHeader header;
    std::vector<CaptionLine> caption_buckets;
    std::vector<DenseLine> dense_blocks;
    std::vector<SubtitleLine> subtitle_lines;
    AssemblyPolicy source_policy;
    /// The records this document was built from (after any truncation). Line
    /// sources index into timeline.records.
    VideoTimeline timeline;

    bool operator==(const TextualizedVideo&) const = default;
};

/// Consolidates a timeline. Captions (ClipCaption, ClipTag, ActionLabel) are
/// bucketed at 1/fps, dense captions at policy.dense_cadence_s; identical
/// adjacent buckets are coalesced when the policy asks for it.
///
/// Throws AmbiguousHeader for two differing VideoClass (or VideoCaption)
/// records and InvalidArgument for overlapping subtitles.
TextualizedVideo assemble(const VideoTimeline& timeline, const AssemblyPolicy& policy = {});

std::string render(const TextualizedVideo& doc);
std::string render_header(const DocumentHeader& header);

/// Drops records in policy.drop_priority order (middle-out within a kind)
/// until the rendered document fits policy.max_render_chars. Throws
/// BudgetTooSmall when even the header does not fit.
TextualizedVideo truncate_to_budget(const TextualizedVideo& doc, const AssemblyPolicy& policy);

/// Order in which records of one kind are dropped: temporal middle first,
/// then alternating outwards, so the beginning and end survive longest.
std::vector<std::size_t> middle_out_order(std::size_t count);

/// Text split back into sections; the inverse of render for conforming text.
struct ParsedDocument {
    std::string header;
    struct Line {
        std::string start;
        std::string end;
        std::string body;  // caption text, dense entries, or subtitle text
    };
    std::vector<Line> captions;
    std::vector<Line> dense;
    std::vector<Line> subtitles;
};

/// Throws Error(Parse) with a line number for non-conforming text.
ParsedDocument parse_document(const std::string& text);

}  // namespace vchat
