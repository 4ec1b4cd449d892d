#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vchat/timeline.hpp"

namespace vchat {

/// External media utilities. Bare names are looked up on PATH.
struct MediaTools {
    std::string ffmpeg = "ffmpeg";
    std::string ffprobe = "ffprobe";
};

struct Keyframe {
    Timecode time;
    std::filesystem::path image;
};

/// Media duration in seconds as reported by ffprobe.
double probe_duration(const std::filesystem::path& media, const MediaTools& tools = {});

/// Extracts one frame per sample time of make_timeline(duration, fps) into
/// out_dir as frame_00000.png, frame_00001.png, ...
///
/// Throws Error(Environment) when a utility is missing or the media cannot be
/// read, Error(Subprocess) with the utility's output when extraction fails.
std::vector<Keyframe> extract_keyframes(const std::filesystem::path& media, double fps,
                                        const std::filesystem::path& out_dir,
                                        const MediaTools& tools = {});

/// Frame file name for index i.
std::string keyframe_name(std::size_t index);

}  // namespace vchat
