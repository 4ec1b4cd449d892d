#pragma once

// "###Human / ###Assistant" dialogue serialization with media sentinels.
//
//   ###Human: <Video>{embed}</Video> The video contains {T} frames sampled at {t0, t1, ...} seconds.
//   ###Human: {text}
//   ###Assistant: {text}
//   ...
//   ###Assistant:                       <- only when the last turn is Human
//
// Image scripts use <Image>{embed}</Image> and carry no frame sentence.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vchat/timeline.hpp"

namespace vchat {

enum class MediaKind { Image, Video };
enum class Role { Human, Assistant };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view name);

struct DialogueMedia {
    MediaKind kind = MediaKind::Video;
    std::string embed_token = "video_embed";
    std::vector<Timecode> frame_times;  // empty for images

    bool operator==(const DialogueMedia&) const = default;
};

struct Turn {
    Role role = Role::Human;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct DialogueScript {
    DialogueMedia media;
    std::vector<Turn> turns;

    bool operator==(const DialogueScript&) const = default;
};

/// First violated invariant, or nullopt. Frame times must sit on the 0.1 s
/// grid the serialized form can express (see quantize_frame_times).
std::optional<std::string> script_violation(const DialogueScript& script);

/// Throws Error(Serialization) for invalid scripts.
std::string serialize_dialogue(const DialogueScript& script);

/// Throws Error(Parse) with a line number.
DialogueScript parse_dialogue(const std::string& text);

/// Integer seconds when whole, otherwise one decimal.
std::string format_frame_time(Timecode t);

/// Snaps times to the 0.1 s grid and drops any that collapse onto the
/// previous one.
std::vector<Timecode> quantize_frame_times(const std::vector<Timecode>& times);

/// The frame sentence: "The video contains T frames sampled at t0, ..., tn seconds."
std::string frame_sentence(const std::vector<Timecode>& times);

}  // namespace vchat
