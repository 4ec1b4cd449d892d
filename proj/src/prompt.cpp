#include "vchat/prompt.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prompt_text.hpp"
#include "vchat/document.hpp"
#include "vchat/error.hpp"

namespace vchat {

namespace {

std::set<std::string> unique_placeholders(std::string_view body) {
    auto names = placeholders_in(body);
    return {names.begin(), names.end()};
}

PromptTemplate make_template(TemplateId id, const char* body) {
    return {id, body, unique_placeholders(body)};
}

bool is_name_char(char c) {
    return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9');
}

/// Calls on_text for literal runs and on_name for each {name}.
template <typename OnText, typename OnName>
void scan(std::string_view body, OnText on_text, OnName on_name) {
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto open = body.find('{', pos);
        if (open == std::string_view::npos) break;
        auto close = open + 1;
        while (close < body.size() && is_name_char(body[close])) ++close;
        if (close < body.size() && body[close] == '}' && close > open + 1) {
            on_text(body.substr(pos, open - pos));
            on_name(std::string(body.substr(open + 1, close - open - 1)));
            pos = close + 1;
        } else {
            on_text(body.substr(pos, open + 1 - pos));
            pos = open + 1;
        }
    }
    on_text(body.substr(pos));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Config, "template file '" + path.string() + "' is missing");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string join_lines(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += '\n';
        out += items[i];
    }
    return out;
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::SystemChat: return "SystemChat";
        case TemplateId::DetailedDescription: return "DetailedDescription";
        case TemplateId::PostProcess: return "PostProcess";
        case TemplateId::ConversationGen: return "ConversationGen";
    }
    return "?";
}

std::string_view to_string(PoolId id) noexcept {
    switch (id) {
        case PoolId::BriefImage: return "BriefImage";
        case PoolId::BriefVideo: return "BriefVideo";
        case PoolId::DetailedImage: return "DetailedImage";
        case PoolId::DetailedVideo: return "DetailedVideo";
    }
    return "?";
}

TemplateId parse_template_id(std::string_view name) {
    for (auto id : kAllTemplates) {
        if (to_string(id) == name) return id;
    }
    fail(ErrorCode::Parse, "unknown template id '" + std::string(name) + "'");
}

const PromptTemplate& builtin_template(TemplateId id) {
    static const PromptTemplate system_chat = make_template(TemplateId::SystemChat, detail::kSystemChatBody);
    static const PromptTemplate detailed =
        make_template(TemplateId::DetailedDescription, detail::kDetailedDescriptionBody);
    static const PromptTemplate post = make_template(TemplateId::PostProcess, detail::kPostProcessBody);
    static const PromptTemplate conversation =
        make_template(TemplateId::ConversationGen, detail::kConversationGenBody);
    switch (id) {
        case TemplateId::SystemChat: return system_chat;
        case TemplateId::DetailedDescription: return detailed;
        case TemplateId::PostProcess: return post;
        case TemplateId::ConversationGen: return conversation;
    }
    return system_chat;
}

const InstructionPool& builtin_pool(PoolId id) {
    static const InstructionPool brief_image{PoolId::BriefImage, detail::kBriefImageItems};
    static const InstructionPool brief_video{PoolId::BriefVideo, detail::kBriefVideoItems};
    static const InstructionPool detailed_image{PoolId::DetailedImage, detail::kDetailedImageItems};
    static const InstructionPool detailed_video{PoolId::DetailedVideo, detail::kDetailedVideoItems};
    switch (id) {
        case PoolId::BriefImage: return brief_image;
        case PoolId::BriefVideo: return brief_video;
        case PoolId::DetailedImage: return detailed_image;
        case PoolId::DetailedVideo: return detailed_video;
    }
    return brief_image;
}

std::size_t expected_pool_size(PoolId id) noexcept {
    switch (id) {
        case PoolId::BriefImage:
        case PoolId::BriefVideo: return 11;
        case PoolId::DetailedImage:
        case PoolId::DetailedVideo: return 16;
    }
    return 0;
}

std::string_view pinned_checksum(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::SystemChat:
            return "559a72ee0ec27b1abbd68bc8f9f287f997da62a6bb50d1be2cf102b042ae9813";
        case TemplateId::DetailedDescription:
            return "abe469c5b9a46b98fe1eb3ce7f6b9bce32eec8094cb0bbb4d6923837ad8b84e7";
        case TemplateId::PostProcess:
            return "9bdaca0eb5b3825ca1667c012a6d3a1089467a2ef21138871b00856124464ac7";
        case TemplateId::ConversationGen:
            return "5c27204e39021ff4a0891e0985308e3fc504f42f7363fcf420bb1c95fdeb4ace";
    }
    return {};
}

std::string_view pinned_checksum(PoolId id) noexcept {
    switch (id) {
        case PoolId::BriefImage:
            return "affc3541bbea866fd7a9068fda09aaea0cefedceb320e87f6c1ee2cbc521b10c";
        case PoolId::BriefVideo:
            return "394bf5577be4908dfbb608e6dd071033552ff2e07202f5ff4773b57d09628157";
        case PoolId::DetailedImage:
            return "de7499bf360e94281323c384ca430b4cb59a0188b6cde8397bdd51b6396bbb24";
        case PoolId::DetailedVideo:
            return "3db76b07159f3e6961e90852bd26e8f9ebe242f773bbf5097b084ed84188621f";
    }
    return {};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorCode::Environment, "sha256 digest failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::vector<std::string> placeholders_in(std::string_view body) {
    std::vector<std::string> names;
    scan(body, [](std::string_view) {}, [&](std::string name) { names.push_back(std::move(name)); });
    return names;
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::vector<std::string> missing, extra;
    for (const auto& name : tmpl.required_placeholders) {
        if (!bindings.contains(name)) missing.push_back(name);
    }
    for (const auto& [name, _] : bindings) {
        if (!tmpl.required_placeholders.contains(name)) extra.push_back(name);
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = std::string(to_string(tmpl.id)) + " bindings mismatch;";
        auto list = [&](const char* label, const std::vector<std::string>& names) {
            if (names.empty()) return;
            msg += std::string(" ") + label + ":";
            for (const auto& n : names) msg += " " + n;
        };
        list("missing", missing);
        list("extra", extra);
        fail(ErrorCode::Binding, msg);
    }
    std::string out;
    scan(
        tmpl.body, [&](std::string_view text) { out += text; },
        [&](const std::string& name) { out += bindings.at(name); });
    return out;
}

std::string render(TemplateId id, const Bindings& bindings) {
    return render(builtin_template(id), bindings);
}

std::pair<std::string, RngState> sample_instruction(PoolId pool, RngState state) {
    const auto& items = builtin_pool(pool).items;
    auto [index, next] = next_below(state, items.size());
    return {items[index], next};
}

bool pool_contains(PoolId pool, std::string_view item) {
    const auto& items = builtin_pool(pool).items;
    return std::find(items.begin(), items.end(), item) != items.end();
}

std::string template_file_name(TemplateId id) {
    switch (id) {
        case TemplateId::SystemChat: return "system_chat.txt";
        case TemplateId::DetailedDescription: return "detailed_description.txt";
        case TemplateId::PostProcess: return "post_process.txt";
        case TemplateId::ConversationGen: return "conversation_gen.txt";
    }
    return {};
}

std::string pool_file_name(PoolId id) {
    switch (id) {
        case PoolId::BriefImage: return "pool_brief_image.txt";
        case PoolId::BriefVideo: return "pool_brief_video.txt";
        case PoolId::DetailedImage: return "pool_detailed_image.txt";
        case PoolId::DetailedVideo: return "pool_detailed_video.txt";
    }
    return {};
}

TemplateSet load_template_dir(const std::filesystem::path& dir) {
    TemplateSet set;
    for (auto id : kAllTemplates) {
        auto path = dir / template_file_name(id);
        auto body = read_file(path);
        if (sha256_hex(body) != pinned_checksum(id)) {
            fail(ErrorCode::Config, "template '" + path.string() + "' does not match its pinned checksum");
        }
        auto names = placeholders_in(body);
        std::set<std::string> unique(names.begin(), names.end());
        if (unique.size() != names.size()) {
            fail(ErrorCode::Config, "template '" + path.string() + "' repeats a placeholder");
        }
        set.templates.push_back({id, std::move(body), std::move(unique)});
    }
    for (auto id : kAllPools) {
        auto path = dir / pool_file_name(id);
        std::istringstream in(read_file(path));
        InstructionPool pool{id, {}};
        for (std::string line; std::getline(in, line);) {
            if (!line.empty()) pool.items.push_back(line);
        }
        if (pool.items.size() != expected_pool_size(id)) {
            fail(ErrorCode::Config, "pool '" + path.string() + "' has " + std::to_string(pool.items.size()) +
                                        " items, expected " + std::to_string(expected_pool_size(id)));
        }
        if (sha256_hex(join_lines(pool.items)) != pinned_checksum(id)) {
            fail(ErrorCode::Config, "pool '" + path.string() + "' does not match its pinned checksum");
        }
        set.pools.push_back(std::move(pool));
    }
    return set;
}

void write_template_dir(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (auto id : kAllTemplates) {
        std::ofstream(dir / template_file_name(id), std::ios::binary) << builtin_template(id).body;
    }
    for (auto id : kAllPools) {
        std::ofstream(dir / pool_file_name(id), std::ios::binary) << join_lines(builtin_pool(id).items) << '\n';
    }
}

std::string timing_interval(double fps) {
    if (!(fps > 0.0)) fail(ErrorCode::InvalidArgument, "fps must be positive");
    const double interval = 1.0 / fps;
    char buf[64];
    if (std::abs(interval - std::round(interval)) < 1e-9) {
        std::snprintf(buf, sizeof buf, "%.0f", std::round(interval));
    } else {
        std::snprintf(buf, sizeof buf, "%.3f", interval);
        std::string s = buf;
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
        return s + " seconds";
    }
    std::string s = buf;
    return s + (s == "1" ? " second" : " seconds");
}

std::string post_process_prompt(const std::string& paragraph) {
    return render(TemplateId::PostProcess, {}) + "\n\n" + paragraph;
}

std::string conversation_prompt(const std::string& description) {
    return render(TemplateId::ConversationGen, {}) + "\n\nVideo description:\n" + description;
}

std::string build_chat_prompt(const std::string& document_text, const std::vector<QaPair>& history,
                              const std::string& question, double fps,
                              std::optional<std::size_t> context_budget) {
    if (question.empty()) fail(ErrorCode::InvalidArgument, "question is empty");
    // Prior rounds go in front of the new question, reusing the template's own
    // "Question: " prefix for the oldest one.
    std::string conversation;
    for (const auto& qa : history) {
        conversation += qa.question;
        conversation += "\nAnswer: ";
        conversation += qa.answer;
        conversation += "\nQuestion: ";
    }
    conversation += question;
    auto prompt = render(TemplateId::SystemChat, {{"timing_interval", timing_interval(fps)},
                                                  {"textualizing_videos", document_text},
                                                  {"question", conversation}});
    if (context_budget && prompt.size() > *context_budget) {
        fail(ErrorCode::Overflow, "prompt of " + std::to_string(prompt.size()) +
                                      " chars exceeds the context budget of " +
                                      std::to_string(*context_budget));
    }
    return prompt;
}

std::string build_chat_prompt(const TextualizedVideo& doc, const std::vector<QaPair>& history,
                              const std::string& question, double fps,
                              std::optional<std::size_t> context_budget) {
    return build_chat_prompt(render(doc), history, question, fps, context_budget);
}

}  // namespace vchat
