#pragma once

// Canonical data model: a video as a set of timestamped perception records.
// All values are immutable once built; operations return new values.

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vchat {

/// Seconds from the start of the video. Always >= 0.
class Timecode {
public:
    constexpr Timecode() = default;
    explicit Timecode(double seconds);

    constexpr double seconds() const noexcept { return seconds_; }

    friend constexpr auto operator<=>(Timecode, Timecode) = default;

private:
    double seconds_ = 0.0;
};

struct Span {
    Timecode start;
    Timecode end;

    double length() const noexcept { return end.seconds() - start.seconds(); }
    bool degenerate() const noexcept { return start == end; }
    bool contains(const Span& other) const noexcept {
        return start <= other.start && other.end <= end;
    }

    friend constexpr auto operator<=>(const Span&, const Span&) = default;
};

struct Region {
    std::string label;
    std::array<int, 4> bbox{};  // x1, y1, x2, y2 in pixels

    friend auto operator<=>(const Region&, const Region&) = default;
};

enum class RecordKind {
    VideoClass,
    VideoCaption,
    ClipCaption,
    ClipTag,
    DenseCaption,
    Subtitle,
    ActionLabel,
};

inline constexpr std::array<RecordKind, 7> kAllRecordKinds = {
    RecordKind::VideoClass,  RecordKind::VideoCaption, RecordKind::ClipCaption,
    RecordKind::ClipTag,     RecordKind::DenseCaption, RecordKind::Subtitle,
    RecordKind::ActionLabel,
};

std::string_view to_string(RecordKind kind) noexcept;
/// Throws Error(Parse) for unknown names.
RecordKind parse_record_kind(std::string_view name);

struct PerceptionRecord {
    RecordKind kind = RecordKind::ClipCaption;
    Span span;
    std::string text;
    std::vector<Region> regions;  // only for DenseCaption
    std::string source_model;
    std::optional<double> confidence;

    bool operator==(const PerceptionRecord&) const = default;
};

/// Total order used to keep timeline records sorted: (start, kind, source)
/// first, then the remaining fields so that distinct records never tie.
bool record_less(const PerceptionRecord& a, const PerceptionRecord& b);

/// Returns the first invariant violation of a record on its own, or nullopt.
std::optional<std::string> record_violation(const PerceptionRecord& record);

/// Throws Error(InvalidArgument) describing the first violated invariant.
void validate_record(const PerceptionRecord& record);

struct VideoTimeline {
    std::string video_id;
    double duration_s = 0.0;
    double fps = 1.0;
    std::vector<Timecode> frame_times;
    std::vector<PerceptionRecord> records;

    bool operator==(const VideoTimeline&) const = default;
};

/// Frame sampling times i / fps for i in [0, ceil(duration * fps)).
std::vector<Timecode> sample_times(double duration_s, double fps);

VideoTimeline make_timeline(std::string video_id, double duration_s, double fps);

/// Returns a new timeline containing the record. Byte-identical duplicates are
/// dropped. Throws OutOfRange if the span leaves [0, duration].
VideoTimeline insert_record(const VideoTimeline& timeline, PerceptionRecord record);

/// Bulk variant of insert_record: validates, sorts and dedups once.
VideoTimeline with_records(const VideoTimeline& timeline, std::vector<PerceptionRecord> records);

/// Checks every timeline invariant; throws InvalidArgument / OutOfRange.
void validate_timeline(const VideoTimeline& timeline);

/// "MM:SS", seconds truncated, minutes unbounded.
std::string format_timecode(Timecode t);
/// Inverse of format_timecode on whole seconds. Throws Error(Parse).
Timecode parse_timecode(std::string_view text);

/// Half-open window [start, end); the final window of a bucketing is closed.
struct Window {
    double start = 0.0;
    double end = 0.0;

    friend constexpr auto operator<=>(const Window&, const Window&) = default;
};

struct Bucket {
    Window window;
    std::vector<std::size_t> record_indices;  // into timeline.records
};

std::vector<Window> bucket_windows(double duration_s, double cadence_s);

/// Whether a span falls into a window under the bucketing rules.
bool overlaps(const Span& span, const Window& window, bool final_window);

std::vector<Bucket> bucket(const VideoTimeline& timeline, double cadence_s);

}  // namespace vchat
