#pragma once

// Instruction-data generation: detailed descriptions (describe, then repair)
// and multi-round conversations, plus their validators.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vchat/dialogue.hpp"
#include "vchat/document.hpp"
#include "vchat/llm_client.hpp"
#include "vchat/rng.hpp"
#include "vchat/timeline.hpp"

namespace vchat {

struct Provenance {
    std::vector<std::string> prompt_ids;  // template ids, in call order
    std::string model_id;
    RngState rng_state;  // the state the record was forged from
    std::string wall_time;

    bool operator==(const Provenance&) const = default;
};

struct DescriptionRecord {
    std::string video_id;
    std::string instruction;  // drawn from the DetailedVideo pool
    std::string text;
    std::vector<Timecode> frame_times;
    Provenance provenance;

    bool operator==(const DescriptionRecord&) const = default;
};

inline constexpr const char* kCategoryDescriptive = "descriptive";
inline constexpr const char* kCategoryTemporal = "temporal";
inline constexpr const char* kCategoryCausal = "causal";

struct ConversationRecord {
    std::string video_id;
    DialogueScript turns;  // media carries the frame times
    std::set<std::string> category_tags;
    Provenance provenance;

    bool operator==(const ConversationRecord&) const = default;
};

struct ValidationReport {
    std::string record_id;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return errors.empty(); }
};

inline constexpr const char* kRefusal = "The provided video does not present such information";

/// Two calls: DetailedDescription, then PostProcess on its output. Throws
/// Error(Forge) naming the failed step ("detailed_description" or
/// "post_process"); InvalidArgument if the timeline has no VideoCaption.
DescriptionRecord forge_description(const VideoTimeline& timeline, LlmClient& client, RngState state,
                                    const LlmParams& params = {}, const std::string& wall_time = {},
                                    const AssemblyPolicy& policy = {});

/// One ConversationGen call over the rendered document, or over `description`
/// when given. Throws ReplyParseError (raw reply kept) when the reply has no
/// QA structure, Error(Forge) when the call fails.
ConversationRecord forge_conversation(const VideoTimeline& timeline, LlmClient& client, RngState state,
                                      const LlmParams& params = {}, const std::string& wall_time = {},
                                      const std::optional<std::string>& description = std::nullopt,
                                      const AssemblyPolicy& policy = {});

/// Splits a model reply into turns. Accepts lines starting "Question:" /
/// "Answer:" or "###Human:" / "###Assistant:". Text before the first marker is
/// ignored; a reply using both shapes, or neither, throws ReplyParseError.
std::vector<Turn> parse_qa_reply(const std::string& reply);

/// Keyword tags over the questions of a conversation.
std::set<std::string> category_tags(const std::vector<Turn>& turns);

/// Whitespace-separated token count.
std::size_t word_count(std::string_view text);

ValidationReport validate_description(const DescriptionRecord& record);
ValidationReport validate_conversation(const ConversationRecord& record);

/// Frame times recorded with forged items: the timeline's sampling instants on
/// the 0.1 s grid.
std::vector<Timecode> record_frame_times(const VideoTimeline& timeline);

}  // namespace vchat
