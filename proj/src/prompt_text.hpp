#pragma once

#include <string>
#include <vector>

namespace vchat::detail {

extern const char* const kSystemChatBody;
extern const char* const kDetailedDescriptionBody;
extern const char* const kPostProcessBody;
extern const char* const kConversationGenBody;

extern const std::vector<std::string> kBriefImageItems;
extern const std::vector<std::string> kBriefVideoItems;
extern const std::vector<std::string> kDetailedImageItems;
extern const std::vector<std::string> kDetailedVideoItems;

}  // namespace vchat::detail
