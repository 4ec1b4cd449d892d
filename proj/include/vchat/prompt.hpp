#pragma once

// Verbatim prompt templates and instruction pools, placeholder substitution,
// and instruction sampling.
//
// Placeholders are written {name}. Template bodies are frozen: each has a
// pinned SHA-256 and a template directory on disk is only accepted if every
// file matches.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vchat/rng.hpp"

namespace vchat {

struct TextualizedVideo;

enum class TemplateId { SystemChat, DetailedDescription, PostProcess, ConversationGen };
enum class PoolId { BriefImage, BriefVideo, DetailedImage, DetailedVideo };

inline constexpr TemplateId kAllTemplates[] = {TemplateId::SystemChat, TemplateId::DetailedDescription,
                                               TemplateId::PostProcess, TemplateId::ConversationGen};
inline constexpr PoolId kAllPools[] = {PoolId::BriefImage, PoolId::BriefVideo, PoolId::DetailedImage,
                                       PoolId::DetailedVideo};

std::string_view to_string(TemplateId id) noexcept;
std::string_view to_string(PoolId id) noexcept;
TemplateId parse_template_id(std::string_view name);

struct PromptTemplate {
    TemplateId id;
    std::string body;
    std::set<std::string> required_placeholders;
};

struct InstructionPool {
    PoolId id;
    std::vector<std::string> items;
};

const PromptTemplate& builtin_template(TemplateId id);
const InstructionPool& builtin_pool(PoolId id);

/// Pinned item counts per pool.
std::size_t expected_pool_size(PoolId id) noexcept;

/// Pinned SHA-256 (hex) of each template body and of each pool joined by '\n'.
std::string_view pinned_checksum(TemplateId id) noexcept;
std::string_view pinned_checksum(PoolId id) noexcept;

std::string sha256_hex(std::string_view data);

/// Placeholder names in order of appearance (duplicates kept).
std::vector<std::string> placeholders_in(std::string_view body);

using Bindings = std::map<std::string, std::string>;

/// Substitutes every placeholder. Throws Error(Binding) listing missing and
/// extra names when bindings do not cover exactly the required set.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);
std::string render(TemplateId id, const Bindings& bindings);

/// Uniform draw from a pool; deterministic in the state, which is advanced.
std::pair<std::string, RngState> sample_instruction(PoolId pool, RngState state);

bool pool_contains(PoolId pool, std::string_view item);

/// File name used for a template or pool inside a template directory.
std::string template_file_name(TemplateId id);
std::string pool_file_name(PoolId id);

struct TemplateSet {
    std::vector<PromptTemplate> templates;
    std::vector<InstructionPool> pools;
};

/// Loads and checksum-verifies a template directory. Throws Error(Config)
/// naming the first missing or drifted file.
TemplateSet load_template_dir(const std::filesystem::path& dir);
void write_template_dir(const std::filesystem::path& dir);

/// "1 second", "2 seconds", "0.5 seconds": the sampling interval 1/fps.
std::string timing_interval(double fps);

/// Text appended after a template that has no slot for its subject.
std::string post_process_prompt(const std::string& paragraph);
std::string conversation_prompt(const std::string& description);

struct QaPair {
    std::string question;
    std::string answer;
};

/// The chat prompt for one round: the system template with the document and
/// the current question, prior rounds serialized in arrival order ahead of the
/// new question. Throws InvalidArgument for an empty question and
/// Error(Overflow) when context_budget is given and the prompt exceeds it.
std::string build_chat_prompt(const std::string& document_text, const std::vector<QaPair>& history,
                              const std::string& question, double fps,
                              std::optional<std::size_t> context_budget = std::nullopt);
std::string build_chat_prompt(const TextualizedVideo& doc, const std::vector<QaPair>& history,
                              const std::string& question, double fps,
                              std::optional<std::size_t> context_budget = std::nullopt);

}  // namespace vchat
