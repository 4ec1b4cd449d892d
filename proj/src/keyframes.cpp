#include "vchat/keyframes.hpp"

#include <unistd.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vchat/error.hpp"

namespace vchat {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& arg) {
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

bool is_executable(const fs::path& p) {
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

std::string resolve_tool(const std::string& name) {
    if (name.find('/') != std::string::npos) {
        if (is_executable(name)) return name;
        fail(ErrorCode::Environment, "media utility '" + name + "' not found or not executable");
    }
    const char* path = std::getenv("PATH");
    std::stringstream dirs(path ? path : "");
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
        if (dir.empty()) continue;
        auto candidate = fs::path(dir) / name;
        if (is_executable(candidate)) return candidate.string();
    }
    fail(ErrorCode::Environment, "media utility '" + name + "' not found on PATH");
}

struct RunResult {
    int exit_code = 0;
    std::string output;
};

RunResult run(const std::vector<std::string>& argv) {
    std::string command;
    for (const auto& a : argv) command += shell_quote(a) + " ";
    command += "2>&1";
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) fail(ErrorCode::Environment, "cannot spawn '" + argv.front() + "'");
    RunResult result;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
    int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

void require_readable(const fs::path& media) {
    std::ifstream in(media, std::ios::binary);
    if (!in) fail(ErrorCode::Environment, "media '" + media.string() + "' is not readable");
}

}  // namespace

std::string keyframe_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.png", index);
    return buf;
}

double probe_duration(const fs::path& media, const MediaTools& tools) {
    require_readable(media);
    auto ffprobe = resolve_tool(tools.ffprobe);
    auto result = run({ffprobe, "-v", "error", "-show_entries", "format=duration", "-of",
                       "default=noprint_wrappers=1:nokey=1", media.string()});
    if (result.exit_code != 0) {
        fail(ErrorCode::Subprocess, "ffprobe failed (exit " + std::to_string(result.exit_code) +
                                        "): " + result.output);
    }
    try {
        std::size_t used = 0;
        double d = std::stod(result.output, &used);
        if (d > 0.0) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::Subprocess, "ffprobe reported no usable duration: " + result.output);
}

std::vector<Keyframe> extract_keyframes(const fs::path& media, double fps, const fs::path& out_dir,
                                        const MediaTools& tools) {
    if (!(fps > 0.0)) fail(ErrorCode::InvalidArgument, "fps must be positive");
    require_readable(media);
    auto ffmpeg = resolve_tool(tools.ffmpeg);
    const double duration = probe_duration(media, tools);
    const auto times = sample_times(duration, fps);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::Environment, "cannot create '" + out_dir.string() + "': " + ec.message());

    std::ostringstream rate;
    rate.precision(17);
    rate << "fps=" << fps;
    auto result = run({ffmpeg, "-v", "error", "-y", "-i", media.string(), "-vf", rate.str(),
                       "-frames:v", std::to_string(times.size()), "-start_number", "0",
                       (out_dir / "frame_%05d.png").string()});
    if (result.exit_code != 0) {
        fail(ErrorCode::Subprocess, "ffmpeg failed (exit " + std::to_string(result.exit_code) +
                                        "): " + result.output);
    }

    std::vector<Keyframe> frames;
    frames.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        auto image = out_dir / keyframe_name(i);
        if (!fs::exists(image)) {
            fail(ErrorCode::Subprocess, "ffmpeg produced no " + image.filename().string() +
                                            " (expected " + std::to_string(times.size()) +
                                            " frames): " + result.output);
        }
        frames.push_back({times[i], image});
    }
    return frames;
}

}  // namespace vchat
