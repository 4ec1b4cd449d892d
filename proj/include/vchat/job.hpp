#pragma once

// Resumable forge jobs and the stage-2 data mixer.
//
// A job turns a directory of fixtures into descriptions.jsonl and
// conversations.jsonl. Task k's rng state depends only on (rng_state, k) and its
// video comes from a sample drawn once from rng_state, so the output is a
// pure function of (fixtures, config, client) and a checkpoint only has to
// remember how many tasks were written.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vchat/clock.hpp"
#include "vchat/document.hpp"
#include "vchat/llm_client.hpp"
#include "vchat/rng.hpp"
#include "vchat/timeline.hpp"

namespace vchat {

struct ForgeJobConfig {
    std::filesystem::path fixture_dir;
    std::size_t n_descriptions = 0;
    std::size_t n_conversations = 0;
    RngState rng_state{0};
    std::size_t parallelism = 1;
    std::filesystem::path output_dir;
    LlmParams llm;
    /// Feed conversation generation the forged-style description instead of
    /// the textualized document.
    bool conversation_from_description = false;
    /// Stamped into every record's provenance; kept fixed so datasets stay
    /// byte-identical across runs. Actual run times go to stats.json.
    std::string record_time = "1970-01-01T00:00:00.000Z";
    /// Stop (as if killed) once this many tasks are written; the checkpoint
    /// is left behind for a later resume.
    std::optional<std::size_t> stop_after;
};

void validate_job_config(const ForgeJobConfig& config);

nlohmann::json job_config_to_json(const ForgeJobConfig& config);
/// Parses the service/CLI form; unknown fields are rejected. "seed" (an
/// integer) is accepted in place of "rng_state". Not validated here: callers
/// fill defaults first.
ForgeJobConfig job_config_from_json(const nlohmann::json& j);

struct JobStats {
    std::size_t requested_descriptions = 0;
    std::size_t requested_conversations = 0;
    std::size_t produced_descriptions = 0;
    std::size_t produced_conversations = 0;
    std::size_t excluded = 0;
    std::size_t warnings = 0;
    std::size_t completed_tasks = 0;
    std::size_t total_tasks = 0;
    bool with_replacement = false;
    bool resumed = false;
    bool interrupted = false;
    double wall_time_s = 0.0;

    std::size_t requested() const noexcept { return requested_descriptions + requested_conversations; }
    std::size_t produced() const noexcept { return produced_descriptions + produced_conversations; }
};

nlohmann::json stats_to_json(const JobStats& stats);

inline constexpr const char* kDescriptionsFile = "descriptions.jsonl";
inline constexpr const char* kConversationsFile = "conversations.jsonl";
inline constexpr const char* kRejectsFile = "rejects.jsonl";
inline constexpr const char* kStatsFile = "stats.json";
inline constexpr const char* kCheckpointFile = "checkpoint.json";

/// Fixtures (*.json) sorted by file name. Throws Config for a missing or
/// empty directory.
std::vector<VideoTimeline> load_corpus(const std::filesystem::path& dir);

/// Sample of `count` indices into a corpus of `size`: a prefix of a
/// permutation when count <= size, independent uniform draws otherwise.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, RngState state,
                                        bool* with_replacement = nullptr);

/// Hash of everything that determines the output, fixture bytes included.
std::string config_hash(const ForgeJobConfig& config);

using ProgressFn = std::function<void(const JobStats&)>;

/// Runs (or resumes, when a checkpoint with a matching config hash exists in
/// output_dir) a forge job. Records failing validation or forging are
/// excluded and logged to rejects.jsonl. Throws Config for bad configs or a
/// checkpoint from a different config.
JobStats run_job(const ForgeJobConfig& config, LlmClient& client, const ProgressFn& progress = nullptr,
                 const std::atomic<bool>* cancel = nullptr);

/// Stage-2 instruction mixture. Base counts (at scale 1) are 7000 video
/// descriptions, 4000 video conversations, 3000 detailed image descriptions,
/// 2000 image conversations and 2000 image reasoning items.
struct MixSource {
    std::string name;
    std::size_t base_count;
};

const std::vector<MixSource>& stage2_sources();

/// Per-source target counts: round(base_count * scale).
std::map<std::string, std::size_t> mix_counts(double scale);

struct MixStats {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, bool> with_replacement;
    std::size_t total = 0;
};

/// Reads one JSONL file per source (keys of `inputs` must be exactly the five
/// source names), draws each source's target count, and writes
/// {"source": name, "item": <original object>} lines to `output`, shuffled.
MixStats mix_stage2(const std::map<std::string, std::filesystem::path>& inputs, double scale, RngState state,
                    const std::filesystem::path& output);

}  // namespace vchat
