#include "vchat/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <pthread.h>

#include <CLI11.hpp>

#include "vchat/chat.hpp"
#include "vchat/dataset.hpp"
#include "vchat/error.hpp"
#include "vchat/fixture.hpp"
#include "vchat/job.hpp"
#include "vchat/prompt.hpp"
#include "vchat/service.hpp"

namespace vchat {

namespace {

std::shared_ptr<LlmClient> pick_client(bool mock, const std::string& endpoint) {
    if (mock) return std::make_shared<MockLlmClient>();
    if (endpoint.empty()) fail(ErrorCode::Config, "pass --mock or --endpoint URL");
    return std::make_shared<HttpLlmClient>(endpoint);
}

int cmd_textualize(const std::string& fixture, std::optional<std::size_t> max_chars, std::ostream& out) {
    auto timeline = load_fixture(fixture);
    AssemblyPolicy policy;
    auto doc = assemble(timeline, policy);
    if (max_chars) {
        policy.max_render_chars = *max_chars;
        doc = truncate_to_budget(doc, policy);
    }
    out << render(doc) << '\n';
    return 0;
}

int cmd_chat(const std::string& fixture, bool mock, const std::string& endpoint, const LlmParams& params,
             std::istream& in, std::ostream& out, std::ostream& err) {
    auto catalog = std::make_shared<VideoCatalog>();
    auto video = catalog->add(load_fixture(fixture));
    ChatOrchestrator chat(catalog, pick_client(mock, endpoint), params);
    auto session = chat.open_session(video->timeline.video_id);
    err << "session " << session.session_id << " on " << video->timeline.video_id
        << " (one question per line, /quit to leave)\n";
    std::string line;
    while (std::getline(in, line)) {
        if (line == "/quit") break;
        if (line.empty()) continue;
        try {
            chat.ask(session.session_id, line, [&](std::string_view chunk) { out << chunk << std::flush; });
            out << '\n';
        } catch (const Error& e) {
            out << '\n';
            err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        }
    }
    return 0;
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "error: cannot open " << path << '\n';
        return 2;
    }
    auto summary = validate_dataset(in);
    out << format_summary(summary);
    return summary.errors > 0 ? 1 : 0;
}

int cmd_serve(const std::string& config_path, std::ostream& out) {
    auto config = load_service_config(config_path);
    // Block the stop signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    Service service(config);
    int port = service.start();
    out << "listening on " << config.listen_host << ":" << port << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Video-chat orchestration: textualize, chat, forge instruction data, serve"};
    app.name("vchat");
    app.require_subcommand(1);

    std::string fixture;
    std::optional<std::size_t> max_chars;
    auto* textualize = app.add_subcommand("textualize", "Print the textualized document of a fixture");
    textualize->add_option("fixture", fixture, "Fixture JSON")->required();
    textualize->add_option("--max-chars", max_chars, "Truncate the document to this many bytes");

    bool mock = false;
    std::string endpoint;
    LlmParams params;
    auto* chat = app.add_subcommand("chat", "Multi-round chat about a fixture, one question per stdin line");
    chat->add_option("fixture", fixture, "Fixture JSON")->required();
    chat->add_flag("--mock", mock, "Use the deterministic offline model");
    chat->add_option("--endpoint", endpoint, "LLM endpoint URL");
    chat->add_option("--model", params.model_id, "Model id");
    chat->add_option("--budget", params.context_budget_chars, "Context budget in characters");

    std::string kind;
    std::string fixtures_dir;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out_dir = "forge_out";
    std::size_t parallelism = 1;
    std::optional<std::size_t> stop_after;
    bool from_description = false;
    auto* forge = app.add_subcommand("forge", "Generate instruction data from fixtures");
    forge->add_option("kind", kind, "describe or converse")->required()->check(CLI::IsMember({"describe", "converse"}));
    forge->add_option("--fixtures", fixtures_dir, "Fixture directory")->required();
    forge->add_option("--n", n, "Number of records")->required();
    forge->add_option("--seed", seed, "Random seed")->required();
    forge->add_flag("--mock", mock, "Use the deterministic offline model");
    forge->add_option("--endpoint", endpoint, "LLM endpoint URL");
    forge->add_option("--model", params.model_id, "Model id");
    forge->add_option("--out", out_dir, "Output directory");
    forge->add_option("--parallelism", parallelism, "Concurrent videos")->check(CLI::PositiveNumber);
    forge->add_option("--stop-after", stop_after, "Stop after this many records (resumable)");
    forge->add_flag("--from-description", from_description,
                    "Generate conversations from a forged description instead of the document");

    std::string dataset;
    auto* validate = app.add_subcommand("validate", "Validate a dataset JSONL file");
    validate->add_option("dataset", dataset, "Dataset JSONL")->required();

    std::string config_path;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", config_path, "Service config file")->required();

    double scale = 0.01;
    std::string mix_out;
    std::map<std::string, std::string> mix_inputs;
    auto* mix = app.add_subcommand("mix", "Build the stage-2 instruction mixture");
    mix->add_option("--scale", scale, "Scale factor on the 18K base mixture");
    mix->add_option("--seed", seed, "Random seed");
    mix->add_option("--out", mix_out, "Output JSONL")->required();
    for (const auto& s : stage2_sources()) {
        auto flag = "--" + s.name;
        std::replace(flag.begin(), flag.end(), '_', '-');
        mix->add_option(flag, mix_inputs[s.name], s.name + " JSONL")->required();
    }

    std::string template_out;
    auto* templates = app.add_subcommand("templates", "Write the pinned prompt templates to a directory");
    templates->add_option("dir", template_out, "Output directory")->required();

    std::vector<const char*> argv = {"vchat"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (*textualize) return cmd_textualize(fixture, max_chars, out);
        if (*chat) return cmd_chat(fixture, mock, endpoint, params, in, out, err);
        if (*forge) {
            ForgeJobConfig config;
            config.fixture_dir = fixtures_dir;
            (kind == "describe" ? config.n_descriptions : config.n_conversations) = n;
            config.rng_state = RngState{seed};
            config.parallelism = parallelism;
            config.output_dir = out_dir;
            config.llm = params;
            config.conversation_from_description = from_description;
            config.stop_after = stop_after;
            auto client = pick_client(mock, endpoint);
            auto stats = run_job(config, *client);
            out << stats_to_json(stats).dump(2) << '\n';
            return 0;
        }
        if (*validate) return cmd_validate(dataset, out, err);
        if (*serve) return cmd_serve(config_path, out);
        if (*mix) {
            std::map<std::string, std::filesystem::path> inputs(mix_inputs.begin(), mix_inputs.end());
            auto stats = mix_stage2(inputs, scale, RngState{seed}, mix_out);
            for (const auto& s : stage2_sources()) out << s.name << ": " << stats.counts[s.name] << '\n';
            out << "total: " << stats.total << '\n';
            return 0;
        }
        if (*templates) {
            write_template_dir(template_out);
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace vchat
