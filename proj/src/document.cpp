#include "vchat/document.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "vchat/error.hpp"

namespace vchat {

namespace {

bool is_caption_kind(RecordKind k) {
    return k == RecordKind::ClipCaption || k == RecordKind::ClipTag || k == RecordKind::ActionLabel;
}

std::string range_text(const Window& w) {
    return format_timecode(Timecode(w.start)) + "-" + format_timecode(Timecode(w.end));
}

std::string dense_entry(const Region& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": [%d, %d, %d, %d]", r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]);
    return r.label + buf;
}

void push_unique(std::vector<std::string>& items, const std::string& item) {
    if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
}

std::vector<std::size_t> merge_sources(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

DocumentHeader build_header(const VideoTimeline& timeline) {
    std::set<std::string> classes, captions;
    for (const auto& r : timeline.records) {
        if (r.kind == RecordKind::VideoClass) classes.insert(r.text);
        if (r.kind == RecordKind::VideoCaption) captions.insert(r.text);
    }
    if (classes.size() > 1) fail(ErrorCode::AmbiguousHeader, "conflicting VideoClass records");
    if (captions.size() > 1) fail(ErrorCode::AmbiguousHeader, "conflicting VideoCaption records");
    DocumentHeader h;
    if (!classes.empty()) h.video_class = *classes.begin();
    if (!captions.empty()) h.video_caption = *captions.begin();
    return h;
}

/// Shared coalescing step for the two bucketed sections.
template <typename Line, typename SameContent>
void append_line(std::vector<Line>& lines, Line line, bool merge, SameContent same) {
    if (merge && !lines.empty() && lines.back().window.end == line.window.start &&
        same(lines.back(), line)) {
        lines.back().window.end = line.window.end;
        lines.back().sources = merge_sources(std::move(lines.back().sources), line.sources);
        return;
    }
    lines.push_back(std::move(line));
}

}  // namespace

void validate_policy(const AssemblyPolicy& policy) {
    if (!(policy.dense_cadence_s > 0.0)) {
        fail(ErrorCode::InvalidArgument, "dense_cadence_s must be positive");
    }
    if (policy.max_render_chars && *policy.max_render_chars == 0) {
        fail(ErrorCode::InvalidArgument, "max_render_chars must be positive");
    }
    std::vector<RecordKind> expected = {RecordKind::ClipCaption, RecordKind::ClipTag,
                                        RecordKind::DenseCaption, RecordKind::Subtitle,
                                        RecordKind::ActionLabel};
    auto given = policy.drop_priority;
    std::sort(given.begin(), given.end());
    std::sort(expected.begin(), expected.end());
    if (given != expected) {
        fail(ErrorCode::InvalidArgument,
             "drop_priority must be a permutation of the droppable kinds "
             "(ClipCaption, ClipTag, DenseCaption, Subtitle, ActionLabel)");
    }
}

TextualizedVideo assemble(const VideoTimeline& timeline, const AssemblyPolicy& policy) {
    validate_policy(policy);
    TextualizedVideo doc;
    doc.header = build_header(timeline);
    doc.source_policy = policy;
    doc.timeline = timeline;
    const auto& records = timeline.records;

    for (const auto& b : bucket(timeline, 1.0 / timeline.fps)) {
        CaptionLine line{b.window, {}, {}};
        std::vector<std::string> texts;
        for (auto i : b.record_indices) {
            if (!is_caption_kind(records[i].kind)) continue;
            push_unique(texts, records[i].text);
            line.sources.push_back(i);
        }
        if (line.sources.empty()) continue;
        line.text = join(texts, ", ");
        append_line(doc.caption_buckets, std::move(line), policy.merge_identical_adjacent,
                    [](const CaptionLine& a, const CaptionLine& b) { return a.text == b.text; });
    }

    for (const auto& b : bucket(timeline, policy.dense_cadence_s)) {
        DenseLine line{b.window, {}, {}};
        for (auto i : b.record_indices) {
            if (records[i].kind != RecordKind::DenseCaption) continue;
            for (const auto& region : records[i].regions) push_unique(line.entries, dense_entry(region));
            line.sources.push_back(i);
        }
        if (line.sources.empty()) continue;
        append_line(doc.dense_blocks, std::move(line), policy.merge_identical_adjacent,
                    [](const DenseLine& a, const DenseLine& b) { return a.entries == b.entries; });
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.kind != RecordKind::Subtitle) continue;
        Window w{r.span.start.seconds(), r.span.end.seconds()};
        if (!doc.subtitle_lines.empty()) {
            auto& prev = doc.subtitle_lines.back();
            if (prev.window == w && prev.text == r.text) {
                prev.sources.push_back(i);  // same utterance from a second source
                continue;
            }
            if (w.start < prev.window.end) {
                fail(ErrorCode::InvalidArgument, "subtitle spans overlap at " + range_text(w));
            }
        }
        doc.subtitle_lines.push_back({w, r.text, {i}});
    }
    return doc;
}

std::string render_header(const DocumentHeader& header) {
    if (header.video_class.empty()) return header.video_caption;
    if (header.video_caption.empty()) return header.video_class;
    return header.video_class + ", " + header.video_caption;
}

std::string render(const TextualizedVideo& doc) {
    std::string out = render_header(doc.header);
    for (const auto& line : doc.caption_buckets) {
        out += '\n';
        out += range_text(line.window);
        out += ' ';
        out += line.text;
    }
    for (const auto& line : doc.dense_blocks) {
        out += '\n';
        out += range_text(line.window);
        out += ' ';
        for (const auto& e : line.entries) {
            out += e;
            out += "; ";
        }
    }
    for (const auto& line : doc.subtitle_lines) {
        out += '\n';
        out += range_text(line.window);
        out += ": ";
        out += line.text;
    }
    return out;
}

std::vector<std::size_t> middle_out_order(std::size_t count) {
    std::vector<std::size_t> order;
    if (count == 0) return order;
    order.reserve(count);
    // Middle first; ties on even counts lean left.
    const auto mid = static_cast<long long>((count - 1) / 2);
    order.push_back(static_cast<std::size_t>(mid));
    for (long long step = 1; order.size() < count; ++step) {
        if (mid + step < static_cast<long long>(count)) order.push_back(static_cast<std::size_t>(mid + step));
        if (order.size() < count && mid - step >= 0) order.push_back(static_cast<std::size_t>(mid - step));
    }
    return order;
}

TextualizedVideo truncate_to_budget(const TextualizedVideo& doc, const AssemblyPolicy& policy) {
    validate_policy(policy);
    if (!policy.max_render_chars) {
        fail(ErrorCode::InvalidArgument, "truncate_to_budget needs max_render_chars");
    }
    const std::size_t budget = *policy.max_render_chars;
    if (render_header(doc.header).size() > budget) {
        fail(ErrorCode::BudgetTooSmall, "budget of " + std::to_string(budget) +
                                            " chars cannot hold the document header");
    }
    if (render(doc).size() <= budget) return doc;

    const auto& records = doc.timeline.records;
    std::vector<std::size_t> drop_order;
    for (auto kind : policy.drop_priority) {
        std::vector<std::size_t> of_kind;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].kind == kind) of_kind.push_back(i);
        }
        for (auto k : middle_out_order(of_kind.size())) drop_order.push_back(of_kind[k]);
    }

    // Smallest prefix of the fixed drop order that fits. Using a prefix of one
    // order for every budget keeps truncation monotone in the budget.
    std::vector<bool> dropped(records.size(), false);
    for (std::size_t k = 0; k < drop_order.size(); ++k) {
        dropped[drop_order[k]] = true;
        VideoTimeline kept = doc.timeline;
        kept.records.clear();
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!dropped[i]) kept.records.push_back(records[i]);
        }
        auto candidate = assemble(kept, doc.source_policy);
        if (render(candidate).size() <= budget) {
            candidate.source_policy.max_render_chars = budget;
            return candidate;
        }
    }
    // Unreachable: once every droppable record is gone only the header remains.
    fail(ErrorCode::BudgetTooSmall, "document cannot be truncated to " + std::to_string(budget));
}

namespace {

bool digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

/// Matches "<MM:SS>-<MM:SS>" at the start of a line; returns its length.
std::size_t match_range(std::string_view line, std::string& start, std::string& end) {
    auto dash = line.find('-');
    if (dash == std::string_view::npos) return 0;
    auto is_tc = [](std::string_view s) {
        auto c = s.find(':');
        return c != std::string_view::npos && c >= 2 && digits(s.substr(0, c)) && s.size() - c - 1 == 2 &&
               digits(s.substr(c + 1));
    };
    auto first = line.substr(0, dash);
    if (!is_tc(first)) return 0;
    auto rest = line.substr(dash + 1);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos || rest.size() < colon + 3) return 0;
    auto second = rest.substr(0, colon + 3);
    if (!is_tc(second)) return 0;
    start = std::string(first);
    end = std::string(second);
    return dash + 1 + second.size();
}

bool is_dense_body(std::string_view body) {
    if (body.empty()) return false;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto close = body.find("]; ", pos);
        if (close == std::string_view::npos) return false;
        auto entry = body.substr(pos, close + 1 - pos);
        auto open = entry.rfind(": [");
        if (open == std::string_view::npos || open == 0) return false;
        auto nums = entry.substr(open + 3, entry.size() - open - 4);
        int count = 0;
        std::size_t p = 0;
        while (p <= nums.size()) {
            auto comma = nums.find(", ", p);
            auto field = nums.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p);
            if (!digits(field)) return false;
            ++count;
            if (comma == std::string_view::npos) break;
            p = comma + 2;
        }
        if (count != 4) return false;
        pos = close + 3;
    }
    return true;
}

}  // namespace

ParsedDocument parse_document(const std::string& text) {
    ParsedDocument doc;
    std::vector<std::string_view> lines;
    std::string_view all(text);
    for (std::size_t pos = 0;;) {
        auto nl = all.find('\n', pos);
        lines.push_back(all.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    doc.header = std::string(lines.front());

    enum class Section { Captions, Dense, Subtitles } section = Section::Captions;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        auto line = lines[n];
        auto error = [&](const std::string& why) {
            fail(ErrorCode::Parse, "document line " + std::to_string(n + 1) + ": " + why);
        };
        ParsedDocument::Line parsed;
        auto len = match_range(line, parsed.start, parsed.end);
        if (len == 0) error("expected a <MM:SS>-<MM:SS> range");
        auto rest = line.substr(len);
        if (rest.starts_with(": ")) {
            parsed.body = std::string(rest.substr(2));
            section = Section::Subtitles;
            doc.subtitles.push_back(std::move(parsed));
            continue;
        }
        if (!rest.starts_with(" ")) error("expected ' ' or ': ' after the time range");
        if (section == Section::Subtitles) error("caption or dense line after the subtitle section");
        auto body = rest.substr(1);
        if (is_dense_body(body)) {
            section = Section::Dense;
            parsed.body = std::string(body);
            doc.dense.push_back(std::move(parsed));
        } else {
            if (section == Section::Dense) error("caption line after the dense section");
            parsed.body = std::string(body);
            doc.captions.push_back(std::move(parsed));
        }
    }
    return doc;
}

}  // namespace vchat
