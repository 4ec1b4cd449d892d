#include "vchat/dialogue.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "vchat/error.hpp"

namespace vchat {

namespace {

constexpr std::string_view kHuman = "###Human: ";
constexpr std::string_view kAssistant = "###Assistant: ";
constexpr std::string_view kGeneration = "\n###Assistant:";
constexpr std::string_view kSentencePrefix = " The video contains ";

double on_grid(double t) { return std::round(t * 10.0) / 10.0; }

std::size_t line_of(std::string_view text, std::size_t pos) {
    return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1;
}

[[noreturn]] void parse_error(std::string_view text, std::size_t pos, const std::string& why) {
    fail(ErrorCode::Parse, "dialogue line " + std::to_string(line_of(text, pos)) + ": " + why);
}

}  // namespace

std::string_view to_string(Role role) noexcept {
    return role == Role::Human ? "Human" : "Assistant";
}

Role parse_role(std::string_view name) {
    if (name == "Human") return Role::Human;
    if (name == "Assistant") return Role::Assistant;
    fail(ErrorCode::Parse, "unknown role '" + std::string(name) + "'");
}

std::string format_frame_time(Timecode t) {
    char buf[48];
    double s = t.seconds();
    if (s == std::floor(s)) {
        std::snprintf(buf, sizeof buf, "%.0f", s);
    } else {
        std::snprintf(buf, sizeof buf, "%.1f", s);
    }
    return buf;
}

std::vector<Timecode> quantize_frame_times(const std::vector<Timecode>& times) {
    std::vector<Timecode> out;
    for (auto t : times) {
        Timecode q(on_grid(t.seconds()));
        if (out.empty() || out.back() < q) out.push_back(q);
    }
    return out;
}

std::string frame_sentence(const std::vector<Timecode>& times) {
    std::string s = "The video contains " + std::to_string(times.size()) + " frames sampled at ";
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i) s += ", ";
        s += format_frame_time(times[i]);
    }
    return s + " seconds.";
}

std::optional<std::string> script_violation(const DialogueScript& script) {
    const auto& media = script.media;
    if (media.embed_token.empty()) return "embed token is empty";
    if (media.embed_token.find_first_of("<>\n") != std::string::npos) {
        return "embed token contains '<', '>' or a line break";
    }
    if (media.kind == MediaKind::Video) {
        if (media.frame_times.empty()) return "video scripts need at least one frame time";
        for (std::size_t i = 0; i < media.frame_times.size(); ++i) {
            double t = media.frame_times[i].seconds();
            if (on_grid(t) != t) return "frame time off the 0.1 s grid";
            if (i > 0 && !(media.frame_times[i - 1] < media.frame_times[i])) {
                return "frame times not strictly increasing";
            }
        }
    } else if (!media.frame_times.empty()) {
        return "image scripts carry no frame times";
    }
    if (script.turns.empty()) return "script has no turns";
    for (std::size_t i = 0; i < script.turns.size(); ++i) {
        const auto& turn = script.turns[i];
        Role expected = i % 2 == 0 ? Role::Human : Role::Assistant;
        if (turn.role != expected) return "roles do not alternate at turn " + std::to_string(i);
        if (turn.text.empty()) return "empty text at turn " + std::to_string(i);
        if (turn.text.find("\n###") != std::string::npos) {
            return "turn " + std::to_string(i) + " contains a line starting with ###";
        }
    }
    return std::nullopt;
}

std::string serialize_dialogue(const DialogueScript& script) {
    if (auto why = script_violation(script)) fail(ErrorCode::Serialization, *why);
    std::string out(kHuman);
    if (script.media.kind == MediaKind::Video) {
        out += "<Video>" + script.media.embed_token + "</Video> " + frame_sentence(script.media.frame_times);
    } else {
        out += "<Image>" + script.media.embed_token + "</Image>";
    }
    for (const auto& turn : script.turns) {
        out += '\n';
        out += turn.role == Role::Human ? kHuman : kAssistant;
        out += turn.text;
    }
    if (script.turns.back().role == Role::Human) out += kGeneration;
    return out;
}

DialogueScript parse_dialogue(const std::string& input) {
    std::string_view text(input);
    if (text.empty()) fail(ErrorCode::Parse, "dialogue line 1: empty input");
    if (text.starts_with(kAssistant) || text.starts_with("###Assistant:")) {
        parse_error(text, 0, "dialogue must start with ###Human");
    }
    if (!text.starts_with(kHuman)) parse_error(text, 0, "missing media header");

    bool generation = text.ends_with(kGeneration);
    if (generation) text.remove_suffix(kGeneration.size());

    // Segment boundaries: every "\n###Human: " or "\n###Assistant: ".
    struct Segment {
        std::size_t start;  // offset of the marker
        Role role;
        std::string_view body;
    };
    std::vector<Segment> segments;
    std::size_t pos = 0;
    Role role = Role::Human;
    std::size_t body_start = kHuman.size();
    for (;;) {
        auto next = text.find("\n###", body_start);
        if (next != std::string_view::npos) {
            auto rest = text.substr(next + 1);
            if (!rest.starts_with(kHuman) && !rest.starts_with(kAssistant)) {
                parse_error(text, next + 1, "unrecognized ### marker");
            }
        }
        auto end = next == std::string_view::npos ? text.size() : next;
        segments.push_back({pos, role, text.substr(body_start, end - body_start)});
        if (next == std::string_view::npos) break;
        pos = next + 1;
        role = text.substr(pos).starts_with(kHuman) ? Role::Human : Role::Assistant;
        body_start = pos + (role == Role::Human ? kHuman.size() : kAssistant.size());
    }

    DialogueScript script;
    auto header = segments.front().body;
    if (header.starts_with("<Image>")) {
        auto close = header.find("</Image>");
        if (close == std::string_view::npos || close + 8 != header.size()) {
            parse_error(text, 0, "malformed <Image> header");
        }
        script.media.kind = MediaKind::Image;
        script.media.embed_token = std::string(header.substr(7, close - 7));
    } else if (header.starts_with("<Video>")) {
        auto close = header.find("</Video>");
        if (close == std::string_view::npos) parse_error(text, 0, "malformed <Video> header");
        script.media.kind = MediaKind::Video;
        script.media.embed_token = std::string(header.substr(7, close - 7));
        auto sentence = header.substr(close + 8);
        if (!sentence.starts_with(kSentencePrefix)) parse_error(text, 0, "missing frame sentence");
        sentence.remove_prefix(kSentencePrefix.size());
        auto at = sentence.find(" frames sampled at ");
        if (at == std::string_view::npos || !sentence.ends_with(" seconds.")) {
            parse_error(text, 0, "malformed frame sentence");
        }
        std::string count_text(sentence.substr(0, at));
        auto list = sentence.substr(at + 19, sentence.size() - at - 19 - 9);
        std::size_t p = 0;
        while (p <= list.size()) {
            auto comma = list.find(", ", p);
            std::string field(list.substr(p, comma == std::string_view::npos ? std::string_view::npos : comma - p));
            char* end = nullptr;
            double t = std::strtod(field.c_str(), &end);
            if (field.empty() || end != field.c_str() + field.size() || !(t >= 0.0)) {
                parse_error(text, 0, "bad frame time '" + field + "'");
            }
            script.media.frame_times.emplace_back(t);
            if (comma == std::string_view::npos) break;
            p = comma + 2;
        }
        if (count_text != std::to_string(script.media.frame_times.size())) {
            parse_error(text, 0, "frame count does not match the listed times");
        }
    } else {
        parse_error(text, 0, "missing media header");
    }

    for (std::size_t i = 1; i < segments.size(); ++i) {
        const auto& s = segments[i];
        Role expected = (i - 1) % 2 == 0 ? Role::Human : Role::Assistant;
        if (s.role != expected) parse_error(text, s.start, "roles do not alternate");
        if (s.body.empty()) parse_error(text, s.start, "empty turn");
        script.turns.push_back({s.role, std::string(s.body)});
    }
    if (script.turns.empty()) parse_error(text, text.size(), "no turns after the media header");
    if (generation != (script.turns.back().role == Role::Human)) {
        parse_error(text, text.size(), generation ? "generation marker after an Assistant turn"
                                                  : "missing ###Assistant: generation marker");
    }
    if (auto why = script_violation(script)) parse_error(text, 0, *why);
    return script;
}

}  // namespace vchat
