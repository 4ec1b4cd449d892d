#include "vchat/forge.hpp"

#include <algorithm>
#include <cctype>

#include "vchat/error.hpp"
#include "vchat/prompt.hpp"

namespace vchat {

namespace {

std::string header_text(const VideoTimeline& timeline, RecordKind kind) {
    for (const auto& r : timeline.records) {
        if (r.kind == kind) return r.text;
    }
    return {};
}

std::string call_step(LlmClient& client, const std::string& prompt, const LlmParams& params,
                      const char* step) {
    std::string out;
    try {
        out = complete_checked(client, prompt, params);
    } catch (const std::exception& e) {
        fail(ErrorCode::Forge, std::string("step ") + step + " failed: " + e.what());
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> lower_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'') {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace

std::vector<Timecode> record_frame_times(const VideoTimeline& timeline) {
    return quantize_frame_times(timeline.frame_times);
}

DescriptionRecord forge_description(const VideoTimeline& timeline, LlmClient& client, RngState state,
                                    const LlmParams& params, const std::string& wall_time,
                                    const AssemblyPolicy& policy) {
    auto caption = header_text(timeline, RecordKind::VideoCaption);
    if (caption.empty()) {
        fail(ErrorCode::InvalidArgument, "video '" + timeline.video_id + "' has no VideoCaption");
    }
    auto document = render(assemble(timeline, policy));
    auto [instruction, _] = sample_instruction(PoolId::DetailedVideo, state);

    auto first = call_step(client,
                           render(TemplateId::DetailedDescription,
                                  {{"origin_caption", caption}, {"textualizing_videos", document}}),
                           params, "detailed_description");
    if (trim(first).empty()) fail(ErrorCode::Forge, "step detailed_description returned empty text");
    auto repaired = call_step(client, post_process_prompt(first), params, "post_process");
    if (trim(repaired).empty()) fail(ErrorCode::Forge, "step post_process returned empty text");

    DescriptionRecord rec;
    rec.video_id = timeline.video_id;
    rec.instruction = instruction;
    rec.text = trim(repaired);
    rec.frame_times = record_frame_times(timeline);
    rec.provenance = {{std::string(to_string(TemplateId::DetailedDescription)),
                       std::string(to_string(TemplateId::PostProcess))},
                      params.model_id,
                      state,
                      wall_time};
    return rec;
}

std::vector<Turn> parse_qa_reply(const std::string& reply) {
    struct Marker {
        std::string_view prefix;
        Role role;
        int shape;
    };
    static constexpr Marker kMarkers[] = {
        {"###Human:", Role::Human, 0},
        {"###Assistant:", Role::Assistant, 0},
        {"Question:", Role::Human, 1},
        {"Answer:", Role::Assistant, 1},
    };

    std::vector<std::string_view> lines;
    std::string_view rest(reply);
    for (;;) {
        auto nl = rest.find('\n');
        lines.push_back(rest.substr(0, nl));
        if (nl == std::string_view::npos) break;
        rest.remove_prefix(nl + 1);
    }

    bool seen[2] = {false, false};
    for (auto line : lines) {
        for (const auto& m : kMarkers) {
            if (line.starts_with(m.prefix)) seen[m.shape] = true;
        }
    }
    if (seen[0] && seen[1]) {
        throw ReplyParseError("reply mixes ###Human/###Assistant and Question:/Answer: markers", reply);
    }
    if (!seen[0] && !seen[1]) throw ReplyParseError("reply has no question/answer structure", reply);
    int shape = seen[0] ? 0 : 1;

    std::vector<Turn> turns;
    std::vector<std::string> bodies;
    for (auto line : lines) {
        const Marker* hit = nullptr;
        for (const auto& m : kMarkers) {
            if (m.shape == shape && line.starts_with(m.prefix)) hit = &m;
        }
        if (hit) {
            turns.push_back({hit->role, {}});
            bodies.emplace_back(line.substr(hit->prefix.size()));
        } else if (!turns.empty()) {
            bodies.back() += '\n';
            bodies.back() += line;
        }
    }
    for (std::size_t i = 0; i < turns.size(); ++i) turns[i].text = trim(bodies[i]);
    return turns;
}

std::set<std::string> category_tags(const std::vector<Turn>& turns) {
    static const std::vector<std::string> temporal = {"when", "before", "after", "first", "then", "next",
                                                      "finally", "during", "while", "order", "sequence",
                                                      "change", "changes", "over time", "progress",
                                                      "beginning", "end", "later", "earlier"};
    static const std::vector<std::string> causal = {"why", "because", "cause", "reason", "purpose",
                                                    "intention", "intend", "lead to", "result", "explain"};
    static const std::vector<std::string> descriptive = {"what", "describe", "who", "where", "which",
                                                         "color", "how many", "location", "appearance"};
    auto has_any = [](const std::string& text, const std::vector<std::string>& keys) {
        auto words = lower_words(text);
        std::string joined;
        for (const auto& w : words) joined += ' ' + w;
        joined += ' ';
        for (const auto& k : keys) {
            if (joined.find(' ' + k + ' ') != std::string::npos) return true;
        }
        return false;
    };
    std::set<std::string> tags;
    for (const auto& t : turns) {
        if (t.role != Role::Human) continue;
        if (has_any(t.text, temporal)) tags.insert(kCategoryTemporal);
        if (has_any(t.text, causal)) tags.insert(kCategoryCausal);
        if (has_any(t.text, descriptive)) tags.insert(kCategoryDescriptive);
    }
    return tags;
}

ConversationRecord forge_conversation(const VideoTimeline& timeline, LlmClient& client, RngState state,
                                      const LlmParams& params, const std::string& wall_time,
                                      const std::optional<std::string>& description,
                                      const AssemblyPolicy& policy) {
    auto subject = description ? *description : render(assemble(timeline, policy));
    auto reply = call_step(client, conversation_prompt(subject), params, "conversation_gen");

    ConversationRecord rec;
    rec.video_id = timeline.video_id;
    rec.turns.media.kind = MediaKind::Video;
    rec.turns.media.frame_times = record_frame_times(timeline);
    rec.turns.turns = parse_qa_reply(reply);
    rec.category_tags = category_tags(rec.turns.turns);
    rec.provenance = {{std::string(to_string(TemplateId::ConversationGen))}, params.model_id, state, wall_time};
    return rec;
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

ValidationReport validate_description(const DescriptionRecord& record) {
    ValidationReport report;
    report.record_id = "description/" + record.video_id;
    if (trim(record.text).empty()) {
        report.errors.push_back("empty_text");
        return report;
    }
    if (record.video_id.empty()) report.errors.push_back("missing_video_id");
    if (!pool_contains(PoolId::DetailedVideo, record.instruction)) {
        report.errors.push_back("instruction_not_in_pool");
    }
    auto words = word_count(record.text);
    if (words <= 150 || words >= 200) report.warnings.push_back("word_count_out_of_range");
    auto tokens = lower_words(record.text);
    bool any_adverb = std::any_of(tokens.begin(), tokens.end(), [](const std::string& w) {
        return w == "first" || w == "next" || w == "then" || w == "finally";
    });
    if (!any_adverb) report.warnings.push_back("missing_sequence_adverbs");
    return report;
}

ValidationReport validate_conversation(const ConversationRecord& record) {
    ValidationReport report;
    report.record_id = "conversation/" + record.video_id;
    const auto& turns = record.turns.turns;
    if (record.video_id.empty()) report.errors.push_back("missing_video_id");

    bool alternating = true;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (turns[i].role != (i % 2 == 0 ? Role::Human : Role::Assistant)) alternating = false;
    }
    std::size_t rounds = 0;
    for (std::size_t i = 0; i + 1 < turns.size(); ++i) {
        if (turns[i].role == Role::Human && turns[i + 1].role == Role::Assistant) ++rounds;
    }
    if (rounds < 2) report.errors.push_back("too_few_rounds");
    if (!alternating) report.errors.push_back("roles_not_alternating");
    bool empty_answer = false, empty_question = false;
    for (const auto& t : turns) {
        if (!trim(t.text).empty()) continue;
        (t.role == Role::Assistant ? empty_answer : empty_question) = true;
    }
    if (empty_answer) report.errors.push_back("empty_answer");
    if (empty_question) report.errors.push_back("empty_question");
    for (const auto& t : turns) {
        if (t.text.find("\n###") != std::string::npos) {
            report.errors.push_back("turn_contains_marker");
            break;
        }
    }
    return report;
}

}  // namespace vchat
