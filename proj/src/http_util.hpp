#pragma once

#include <string>

namespace vchat::detail {

/// "http://host:port/path" -> {"http://host:port", "/path"}.
struct SplitUrl {
    std::string origin;
    std::string path;
};

SplitUrl split_url(const std::string& url);

}  // namespace vchat::detail
