#include "vchat/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "vchat/error.hpp"

namespace vchat {

namespace {

constexpr double kEpsilon = 1e-9;

bool has_line_break(std::string_view s) {
    return s.find_first_of("\r\n") != std::string_view::npos;
}

}  // namespace

Timecode::Timecode(double seconds) : seconds_(seconds) {
    if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
        fail(ErrorCode::InvalidArgument, "timecode must be a finite value >= 0");
    }
}

std::string_view to_string(RecordKind kind) noexcept {
    switch (kind) {
        case RecordKind::VideoClass: return "VideoClass";
        case RecordKind::VideoCaption: return "VideoCaption";
        case RecordKind::ClipCaption: return "ClipCaption";
        case RecordKind::ClipTag: return "ClipTag";
        case RecordKind::DenseCaption: return "DenseCaption";
        case RecordKind::Subtitle: return "Subtitle";
        case RecordKind::ActionLabel: return "ActionLabel";
    }
    return "?";
}

RecordKind parse_record_kind(std::string_view name) {
    for (auto kind : kAllRecordKinds) {
        if (to_string(kind) == name) return kind;
    }
    fail(ErrorCode::Parse, "unknown record kind '" + std::string(name) + "'");
}

bool record_less(const PerceptionRecord& a, const PerceptionRecord& b) {
    auto key = [](const PerceptionRecord& r) {
        return std::tie(r.span.start, r.kind, r.source_model, r.span.end, r.text, r.regions,
                        r.confidence);
    };
    return key(a) < key(b);
}

std::optional<std::string> record_violation(const PerceptionRecord& r) {
    if (r.span.start > r.span.end) return "span start after span end";
    if (r.source_model.empty()) return "source_model is empty";
    if (has_line_break(r.text)) return "text contains a line break";
    if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
        return "confidence outside [0, 1]";
    }
    if (r.kind == RecordKind::DenseCaption) {
        if (r.regions.empty()) return "DenseCaption without regions";
    } else {
        if (!r.regions.empty()) return "regions only allowed on DenseCaption";
        if (r.text.empty()) return "text is empty";
    }
    for (const auto& region : r.regions) {
        if (region.label.empty()) return "region label is empty";
        if (has_line_break(region.label)) return "region label contains a line break";
        const auto& b = region.bbox;
        if (b[0] < 0 || b[1] < 0 || b[2] < 0 || b[3] < 0) return "bbox coordinate below zero";
        if (b[0] > b[2]) return "bbox x1 > x2";
        if (b[1] > b[3]) return "bbox y1 > y2";
    }
    return std::nullopt;
}

void validate_record(const PerceptionRecord& record) {
    if (auto why = record_violation(record)) {
        fail(ErrorCode::InvalidArgument,
             std::string(to_string(record.kind)) + " record: " + *why);
    }
}

std::vector<Timecode> sample_times(double duration_s, double fps) {
    if (!(duration_s > 0.0) || !(fps > 0.0) || !std::isfinite(duration_s) || !std::isfinite(fps)) {
        fail(ErrorCode::InvalidArgument, "duration and fps must be positive");
    }
    auto count = static_cast<std::size_t>(std::ceil(duration_s * fps - kEpsilon));
    count = std::max<std::size_t>(count, 1);
    while (count > 1 && static_cast<double>(count - 1) / fps >= duration_s) --count;

    std::vector<Timecode> times;
    times.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        times.emplace_back(static_cast<double>(i) / fps);
    }
    return times;
}

VideoTimeline make_timeline(std::string video_id, double duration_s, double fps) {
    VideoTimeline t;
    t.frame_times = sample_times(duration_s, fps);
    t.video_id = std::move(video_id);
    t.duration_s = duration_s;
    t.fps = fps;
    return t;
}

namespace {

void check_fits(const VideoTimeline& timeline, const PerceptionRecord& record) {
    validate_record(record);
    if (record.span.end.seconds() > timeline.duration_s + kEpsilon) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s record span [%g, %g] exceeds duration %g",
                      std::string(to_string(record.kind)).c_str(), record.span.start.seconds(),
                      record.span.end.seconds(), timeline.duration_s);
        fail(ErrorCode::OutOfRange, buf);
    }
    if (record.kind == RecordKind::VideoClass || record.kind == RecordKind::VideoCaption) {
        if (record.span.start.seconds() > kEpsilon ||
            std::abs(record.span.end.seconds() - timeline.duration_s) > kEpsilon) {
            fail(ErrorCode::OutOfRange,
                 std::string(to_string(record.kind)) + " record must span the whole video");
        }
    }
}

}  // namespace

VideoTimeline insert_record(const VideoTimeline& timeline, PerceptionRecord record) {
    check_fits(timeline, record);
    VideoTimeline out = timeline;
    auto pos = std::lower_bound(out.records.begin(), out.records.end(), record, record_less);
    if (pos != out.records.end() && *pos == record) return out;
    out.records.insert(pos, std::move(record));
    return out;
}

VideoTimeline with_records(const VideoTimeline& timeline, std::vector<PerceptionRecord> records) {
    for (const auto& r : records) check_fits(timeline, r);
    VideoTimeline out = timeline;
    out.records.insert(out.records.end(), std::make_move_iterator(records.begin()),
                       std::make_move_iterator(records.end()));
    std::stable_sort(out.records.begin(), out.records.end(), record_less);
    out.records.erase(std::unique(out.records.begin(), out.records.end()), out.records.end());
    return out;
}

void validate_timeline(const VideoTimeline& timeline) {
    if (!(timeline.duration_s > 0.0) || !(timeline.fps > 0.0)) {
        fail(ErrorCode::InvalidArgument, "duration and fps must be positive");
    }
    if (timeline.frame_times != sample_times(timeline.duration_s, timeline.fps)) {
        fail(ErrorCode::InvalidArgument, "frame_times do not match duration and fps");
    }
    for (std::size_t i = 0; i < timeline.records.size(); ++i) {
        check_fits(timeline, timeline.records[i]);
        if (i > 0 && !record_less(timeline.records[i - 1], timeline.records[i])) {
            fail(ErrorCode::InvalidArgument, "records are not strictly sorted");
        }
    }
}

std::string format_timecode(Timecode t) {
    // Guard against 1.9999999 style values produced by i / fps.
    auto whole = static_cast<long long>(std::floor(t.seconds() + kEpsilon));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", whole / 60, whole % 60);
    return buf;
}

Timecode parse_timecode(std::string_view text) {
    auto colon = text.find(':');
    auto all_digits = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (colon == std::string_view::npos || colon < 2 || text.size() - colon - 1 != 2) {
        fail(ErrorCode::Parse, "malformed timecode '" + std::string(text) + "'");
    }
    auto minutes = text.substr(0, colon);
    auto seconds = text.substr(colon + 1);
    if (!all_digits(minutes) || !all_digits(seconds)) {
        fail(ErrorCode::Parse, "malformed timecode '" + std::string(text) + "'");
    }
    long long m = std::stoll(std::string(minutes));
    long long s = std::stoll(std::string(seconds));
    if (s >= 60) fail(ErrorCode::Parse, "seconds field >= 60 in '" + std::string(text) + "'");
    return Timecode(static_cast<double>(m * 60 + s));
}

std::vector<Window> bucket_windows(double duration_s, double cadence_s) {
    if (!(cadence_s > 0.0)) fail(ErrorCode::InvalidArgument, "cadence must be positive");
    std::vector<Window> windows;
    if (!(duration_s > 0.0)) return windows;
    auto count = static_cast<std::size_t>(std::ceil(duration_s / cadence_s - kEpsilon));
    count = std::max<std::size_t>(count, 1);
    for (std::size_t k = 0; k < count; ++k) {
        double start = static_cast<double>(k) * cadence_s;
        double end = k + 1 == count ? duration_s : static_cast<double>(k + 1) * cadence_s;
        windows.push_back({start, end});
    }
    return windows;
}

bool overlaps(const Span& span, const Window& window, bool final_window) {
    double s = span.start.seconds();
    double e = span.end.seconds();
    if (span.degenerate()) {
        return s >= window.start && (s < window.end || (final_window && s <= window.end));
    }
    return s < window.end && e > window.start;
}

std::vector<Bucket> bucket(const VideoTimeline& timeline, double cadence_s) {
    auto windows = bucket_windows(timeline.duration_s, cadence_s);
    std::vector<Bucket> buckets;
    buckets.reserve(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) {
        Bucket b{windows[w], {}};
        bool final_window = w + 1 == windows.size();
        for (std::size_t i = 0; i < timeline.records.size(); ++i) {
            if (overlaps(timeline.records[i].span, b.window, final_window)) {
                b.record_indices.push_back(i);
            }
        }
        buckets.push_back(std::move(b));
    }
    return buckets;
}

}  // namespace vchat
