#include "vchat/job.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vchat/dataset.hpp"
#include "vchat/error.hpp"
#include "vchat/fixture.hpp"
#include "vchat/forge.hpp"
#include "vchat/parallel.hpp"
#include "vchat/prompt.hpp"

namespace vchat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fs::path> fixture_files(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) fail(ErrorCode::Config, "fixture dir " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::Config, "fixture dir " + dir.string() + " has no fixtures");
    return files;
}

// Writes to a sibling temp file and renames over the target.
void write_atomic(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string task_id(std::size_t k, std::size_t n_descriptions) {
    return k < n_descriptions ? "d" + std::to_string(k) : "c" + std::to_string(k - n_descriptions);
}

struct TaskResult {
    std::optional<DatasetRecord> record;
    ValidationReport report;
    std::string failure;    // forge or parse failure, if any
    std::string raw_reply;  // kept for unparseable replies
};

}  // namespace

void validate_job_config(const ForgeJobConfig& c) {
    if (c.fixture_dir.empty()) fail(ErrorCode::Config, "fixture_dir is required");
    if (c.output_dir.empty()) fail(ErrorCode::Config, "output_dir is required");
    if (c.parallelism < 1) fail(ErrorCode::Config, "parallelism must be >= 1");
    try {
        validate_params(c.llm);
    } catch (const Error& e) {
        fail(ErrorCode::Config, e.what());
    }
}

json job_config_to_json(const ForgeJobConfig& c) {
    json j = {{"fixture_dir", c.fixture_dir.string()},
              {"n_descriptions", c.n_descriptions},
              {"n_conversations", c.n_conversations},
              {"rng_state", to_hex(c.rng_state)},
              {"parallelism", c.parallelism},
              {"output_dir", c.output_dir.string()},
              {"llm",
               {{"model_id", c.llm.model_id},
                {"temperature", c.llm.temperature},
                {"max_output_tokens", c.llm.max_output_tokens},
                {"context_budget_chars", c.llm.context_budget_chars}}},
              {"conversation_from_description", c.conversation_from_description},
              {"record_time", c.record_time}};
    if (c.stop_after) j["stop_after"] = *c.stop_after;
    return j;
}

namespace {

// nlohmann converts -1 to a huge size_t without complaint.
std::uint64_t get_unsigned(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && (!v.is_number_integer() || v.get<std::int64_t>() < 0))
        fail(ErrorCode::Config, key + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

}  // namespace

ForgeJobConfig job_config_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Config, "job config must be a JSON object");
    ForgeJobConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "fixture_dir") c.fixture_dir = v.get<std::string>();
            else if (key == "n_descriptions") c.n_descriptions = get_unsigned(v, key);
            else if (key == "n_conversations") c.n_conversations = get_unsigned(v, key);
            else if (key == "seed") c.rng_state = RngState{get_unsigned(v, key)};
            else if (key == "rng_state") c.rng_state = rng_from_hex(v.get<std::string>());
            else if (key == "parallelism") c.parallelism = get_unsigned(v, key);
            else if (key == "output_dir") c.output_dir = v.get<std::string>();
            else if (key == "conversation_from_description") c.conversation_from_description = v.get<bool>();
            else if (key == "record_time") c.record_time = v.get<std::string>();
            else if (key == "stop_after") c.stop_after = get_unsigned(v, key);
            else if (key == "llm") {
                if (!v.is_object()) fail(ErrorCode::Config, "llm must be an object");
                for (const auto& [k2, p] : v.items()) {
                    if (k2 == "model_id") c.llm.model_id = p.get<std::string>();
                    else if (k2 == "temperature") c.llm.temperature = p.get<double>();
                    else if (k2 == "max_output_tokens") c.llm.max_output_tokens = p.get<int>();
                    else if (k2 == "context_budget_chars") c.llm.context_budget_chars = get_unsigned(p, k2);
                    else fail(ErrorCode::Config, "unknown llm field '" + k2 + "'");
                }
            } else {
                fail(ErrorCode::Config, "unknown job config field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, std::string("bad job config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        fail(ErrorCode::Config, std::string("bad job config: ") + e.what());
    }
    return c;
}

json stats_to_json(const JobStats& s) {
    return {{"requested", s.requested()},
            {"produced", s.produced()},
            {"excluded", s.excluded},
            {"wall_time", s.wall_time_s},
            {"with_replacement", s.with_replacement},
            {"requested_descriptions", s.requested_descriptions},
            {"requested_conversations", s.requested_conversations},
            {"produced_descriptions", s.produced_descriptions},
            {"produced_conversations", s.produced_conversations},
            {"warnings", s.warnings},
            {"completed_tasks", s.completed_tasks},
            {"total_tasks", s.total_tasks},
            {"resumed", s.resumed},
            {"interrupted", s.interrupted}};
}

std::vector<VideoTimeline> load_corpus(const fs::path& dir) {
    std::vector<VideoTimeline> out;
    for (const auto& f : fixture_files(dir)) out.push_back(load_fixture(f));
    return out;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, RngState state,
                                        bool* with_replacement) {
    if (size == 0 && count > 0) fail(ErrorCode::Config, "cannot sample from an empty corpus");
    std::vector<std::size_t> out;
    bool replace = count > size;
    if (with_replacement) *with_replacement = replace;
    if (replace) {
        for (std::size_t i = 0; i < count; ++i) {
            auto [v, next] = next_below(state, size);
            out.push_back(static_cast<std::size_t>(v));
            state = next;
        }
        return out;
    }
    std::vector<std::size_t> perm(size);
    for (std::size_t i = 0; i < size; ++i) perm[i] = i;
    // Partial Fisher-Yates: only the first `count` slots are needed.
    for (std::size_t i = 0; i < count; ++i) {
        auto [r, next] = next_below(state, size - i);
        state = next;
        std::swap(perm[i], perm[i + static_cast<std::size_t>(r)]);
    }
    perm.resize(count);
    return perm;
}

std::string config_hash(const ForgeJobConfig& c) {
    json files = json::array();
    for (const auto& f : fixture_files(c.fixture_dir)) {
        files.push_back({f.filename().string(), sha256_hex(read_bytes(f))});
    }
    json j = {{"fixtures", std::move(files)},
              {"n_descriptions", c.n_descriptions},
              {"n_conversations", c.n_conversations},
              {"rng_state", to_hex(c.rng_state)},
              {"llm", job_config_to_json(c)["llm"]},
              {"conversation_from_description", c.conversation_from_description},
              {"record_time", c.record_time}};
    return sha256_hex(j.dump());
}

JobStats run_job(const ForgeJobConfig& config, LlmClient& client, const ProgressFn& progress,
                 const std::atomic<bool>* cancel) {
    auto started = std::chrono::steady_clock::now();
    validate_job_config(config);
    auto corpus = load_corpus(config.fixture_dir);
    auto hash = config_hash(config);
    fs::create_directories(config.output_dir);

    JobStats stats;
    stats.requested_descriptions = config.n_descriptions;
    stats.requested_conversations = config.n_conversations;
    stats.total_tasks = config.n_descriptions + config.n_conversations;

    bool wr_d = false, wr_c = false;
    auto d_idx = sample_indices(corpus.size(), config.n_descriptions, split(config.rng_state, 1), &wr_d);
    auto c_idx = sample_indices(corpus.size(), config.n_conversations, split(config.rng_state, 2), &wr_c);
    stats.with_replacement = wr_d || wr_c;
    auto task_root = split(config.rng_state, 3);

    const auto d_path = config.output_dir / kDescriptionsFile;
    const auto c_path = config.output_dir / kConversationsFile;
    const auto r_path = config.output_dir / kRejectsFile;
    const auto ckpt_path = config.output_dir / kCheckpointFile;

    // Resume from a checkpoint, rolling files back to the recorded offsets so
    // a write torn by a kill is discarded.
    std::uintmax_t offsets[3] = {0, 0, 0};
    std::vector<std::string> completed_ids;
    if (fs::exists(ckpt_path)) {
        json ck = json::parse(read_bytes(ckpt_path), nullptr, false);
        if (ck.is_discarded() || !ck.is_object()) fail(ErrorCode::Config, "unreadable checkpoint " + ckpt_path.string());
        if (ck.value("config_hash", "") != hash) {
            fail(ErrorCode::Config, "checkpoint in " + config.output_dir.string() + " belongs to a different config");
        }
        try {
            completed_ids = ck.at("completed_ids").get<std::vector<std::string>>();
            const auto& off = ck.at("offsets");
            offsets[0] = off.at("descriptions").get<std::uintmax_t>();
            offsets[1] = off.at("conversations").get<std::uintmax_t>();
            offsets[2] = off.at("rejects").get<std::uintmax_t>();
            const auto& counts = ck.at("counts");
            stats.produced_descriptions = counts.at("produced_descriptions").get<std::size_t>();
            stats.produced_conversations = counts.at("produced_conversations").get<std::size_t>();
            stats.excluded = counts.at("excluded").get<std::size_t>();
            stats.warnings = counts.at("warnings").get<std::size_t>();
        } catch (const json::exception& e) {
            fail(ErrorCode::Config, std::string("malformed checkpoint: ") + e.what());
        }
        if (completed_ids.size() > stats.total_tasks) fail(ErrorCode::Config, "checkpoint has too many tasks");
        for (std::size_t k = 0; k < completed_ids.size(); ++k) {
            if (completed_ids[k] != task_id(k, config.n_descriptions)) {
                fail(ErrorCode::Config, "checkpoint task order does not match the config");
            }
        }
        stats.resumed = true;
    }
    const fs::path paths[3] = {d_path, c_path, r_path};
    for (int i = 0; i < 3; ++i) {
        if (!fs::exists(paths[i])) std::ofstream(paths[i], std::ios::binary).flush();
        if (fs::file_size(paths[i]) < offsets[i]) fail(ErrorCode::Config, paths[i].string() + " is shorter than its checkpoint");
        fs::resize_file(paths[i], offsets[i]);
    }
    stats.completed_tasks = completed_ids.size();

    std::ofstream outs[3];
    for (int i = 0; i < 3; ++i) {
        outs[i].open(paths[i], std::ios::binary | std::ios::app);
        if (!outs[i]) fail(ErrorCode::Io, "cannot open " + paths[i].string());
    }

    auto run_task = [&](std::size_t k) {
        TaskResult res;
        bool is_desc = k < config.n_descriptions;
        const auto& timeline = corpus[is_desc ? d_idx[k] : c_idx[k - config.n_descriptions]];
        auto state = split(task_root, k);
        try {
            if (is_desc) {
                auto rec = forge_description(timeline, client, state, config.llm, config.record_time);
                res.report = validate_description(rec);
                res.record = std::move(rec);
            } else {
                std::optional<std::string> description;
                if (config.conversation_from_description) {
                    description = forge_description(timeline, client, split(state, 1), config.llm).text;
                }
                auto rec = forge_conversation(timeline, client, state, config.llm, config.record_time, description);
                res.report = validate_conversation(rec);
                res.record = std::move(rec);
            }
        } catch (const ReplyParseError& e) {
            res.failure = e.what();
            res.raw_reply = e.raw_reply();
        } catch (const Error& e) {
            res.failure = std::string(to_string(e.code())) + ": " + e.what();
        }
        return res;
    };

    auto write_checkpoint = [&] {
        json ck = {{"config_hash", hash},
                   {"rng_state", to_hex(config.rng_state)},
                   {"completed_ids", completed_ids},
                   {"offsets",
                    {{"descriptions", static_cast<std::uintmax_t>(outs[0].tellp())},
                     {"conversations", static_cast<std::uintmax_t>(outs[1].tellp())},
                     {"rejects", static_cast<std::uintmax_t>(outs[2].tellp())}}},
                   {"counts",
                    {{"produced_descriptions", stats.produced_descriptions},
                     {"produced_conversations", stats.produced_conversations},
                     {"excluded", stats.excluded},
                     {"warnings", stats.warnings}}}};
        write_atomic(ckpt_path, ck.dump(2) + "\n");
    };

    const std::size_t window = std::max<std::size_t>(1, config.parallelism * 2);
    std::size_t k = stats.completed_tasks;
    while (k < stats.total_tasks) {
        if ((cancel && cancel->load()) || (config.stop_after && k >= *config.stop_after)) {
            stats.interrupted = true;
            break;
        }
        std::size_t end = std::min(stats.total_tasks, k + window);
        if (config.stop_after) end = std::min(end, std::max(*config.stop_after, k + 1));
        std::vector<TaskResult> results(end - k);
        parallel_for(results.size(), config.parallelism, [&](std::size_t i) { results[i] = run_task(k + i); });

        // Single writer, task order.
        for (std::size_t i = 0; i < results.size(); ++i) {
            auto& res = results[i];
            auto id = task_id(k + i, config.n_descriptions);
            if (res.record && res.report.ok()) {
                bool is_desc = std::holds_alternative<DescriptionRecord>(*res.record);
                outs[is_desc ? 0 : 1] << to_jsonl_line(*res.record);
                (is_desc ? stats.produced_descriptions : stats.produced_conversations) += 1;
                stats.warnings += res.report.warnings.size();
            } else {
                json reject = {{"task", id}};
                if (res.record) {
                    reject["record"] = to_json(*res.record);
                    reject["errors"] = res.report.errors;
                } else {
                    reject["error"] = res.failure;
                    if (!res.raw_reply.empty()) reject["raw_reply"] = res.raw_reply;
                }
                outs[2] << reject.dump() << '\n';
                ++stats.excluded;
            }
            completed_ids.push_back(std::move(id));
        }
        for (auto& o : outs) {
            o.flush();
            if (!o) fail(ErrorCode::Io, "dataset write failed in " + config.output_dir.string());
        }
        k = end;
        stats.completed_tasks = k;
        write_checkpoint();
        if (progress) progress(stats);
    }

    if (!stats.interrupted) fs::remove(ckpt_path);
    stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_atomic(config.output_dir / kStatsFile, stats_to_json(stats).dump(2) + "\n");
    return stats;
}

const std::vector<MixSource>& stage2_sources() {
    static const std::vector<MixSource> sources = {
        {"video_descriptions", 7000},
        {"video_conversations", 4000},
        {"image_descriptions", 3000},
        {"image_conversations", 2000},
        {"image_reasoning", 2000},
    };
    return sources;
}

std::map<std::string, std::size_t> mix_counts(double scale) {
    if (!std::isfinite(scale) || scale <= 0.0) fail(ErrorCode::InvalidArgument, "mix scale must be positive");
    std::map<std::string, std::size_t> out;
    for (const auto& s : stage2_sources()) {
        out[s.name] = static_cast<std::size_t>(std::llround(static_cast<double>(s.base_count) * scale));
    }
    return out;
}

MixStats mix_stage2(const std::map<std::string, fs::path>& inputs, double scale, RngState state,
                    const fs::path& output) {
    auto counts = mix_counts(scale);
    for (const auto& [name, _] : inputs) {
        if (!counts.count(name)) fail(ErrorCode::Config, "unknown mix source '" + name + "'");
    }
    MixStats stats;
    std::vector<json> lines;
    const auto& sources = stage2_sources();
    for (std::size_t si = 0; si < sources.size(); ++si) {
        const auto& name = sources[si].name;
        auto it = inputs.find(name);
        if (it == inputs.end()) fail(ErrorCode::Config, "missing mix source '" + name + "'");
        std::ifstream in(it->second, std::ios::binary);
        if (!in) fail(ErrorCode::Io, "cannot open " + it->second.string());
        std::vector<json> items;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                fail(ErrorCode::Parse, it->second.string() + ": line " + std::to_string(n) + ": not a JSON object");
            }
            items.push_back(std::move(j));
        }
        bool replaced = false;
        auto picks = sample_indices(items.size(), counts[name], split(state, si + 1), &replaced);
        for (auto p : picks) lines.push_back({{"source", name}, {"item", items[p]}});
        stats.counts[name] = picks.size();
        stats.with_replacement[name] = replaced;
        stats.total += picks.size();
    }
    auto order = sample_indices(lines.size(), lines.size(), split(state, 0));
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + output.string());
    for (auto i : order) out << lines[i].dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed for " + output.string());
    return stats;
}

}  // namespace vchat
