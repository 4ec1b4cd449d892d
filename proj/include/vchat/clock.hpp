#pragma once

#include <functional>
#include <string>

namespace vchat {

/// Returns a wall-clock timestamp string. Injected wherever time is recorded
/// so tests can pin it.
using WallClock = std::function<std::string()>;

/// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_now();

}  // namespace vchat
