#include "vchat/llm_client.hpp"

#include <cstdint>
#include <cctype>
#include <cstdlib>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vchat/error.hpp"
#include "vchat/prompt.hpp"

namespace vchat {

using nlohmann::json;

void validate_params(const LlmParams& p) {
    if (p.model_id.empty()) fail(ErrorCode::InvalidArgument, "model_id is empty");
    if (!(p.temperature >= 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be >= 0");
    if (p.max_output_tokens <= 0) fail(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
    if (p.context_budget_chars == 0) fail(ErrorCode::InvalidArgument, "context_budget_chars must be positive");
}

std::string complete_checked(LlmClient& client, const std::string& prompt, const LlmParams& params,
                             const ChunkSink& sink) {
    std::string streamed;
    std::string answer;
    try {
        answer = client.complete(prompt, params, [&](std::string_view chunk) {
            streamed.append(chunk);
            if (sink) sink(chunk);
        });
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorCode::Transport, std::string("LLM client failed: ") + e.what());
    }
    if (streamed != answer) {
        fail(ErrorCode::Transport, "LLM stream does not match the final answer");
    }
    return answer;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::string last_words(std::string_view text, std::size_t count) {
    std::vector<std::string_view> words;
    std::size_t end = text.size();
    while (words.size() < count) {
        while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
        if (end == 0) break;
        std::size_t start = end;
        while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1]))) --start;
        words.push_back(text.substr(start, end - start));
        end = start;
    }
    std::string out;
    for (auto it = words.rbegin(); it != words.rend(); ++it) {
        if (!out.empty()) out += ' ';
        out += *it;
    }
    return out;
}

const std::string& mock_description_text() {
    static const std::string text =
        "First, we see a young woman with long brown hair wearing a backpack standing on the edge of a "
        "cliff, looking at the beautiful mountain scenery. She is in awe and stands there for a few "
        "seconds. Next, we see her turning around slowly, with her arms open wide. Then, we see her "
        "taking a few steps back, still facing the canyon, with her arms still open wide. She seems to "
        "be soaking in the grandeur of the view. Finally, she stands confidently at the edge of the "
        "cliff, her backpack still on her back, as if she has conquered the mountain. Throughout the "
        "video, we see the vast expanse of the canyon with the mountains in the background. The sky is "
        "overcast in some parts and clear blue in others, creating a beautiful contrast. The camera "
        "holds steady while the light slowly shifts across the rocky valley far below. Overall, the "
        "young woman seems to be thrilled with the view and enjoys every bit of it with open arms.";
    return text;
}

const std::string& mock_dialogue_text() {
    static const std::string text =
        "###Human: What is happening in the video?\n"
        "###Assistant: In the video, we see a silhouette of a young woman holding a smartphone and "
        "taking pictures of the sunset over the sea on the beach at night. Then, there are several "
        "other silhouettes of people taking pictures and looking at their phones.\n"
        "###Human: Can you describe the interactions between the objects in the video?\n"
        "###Assistant: The silhouettes of people in the video are holding smartphones, and she is "
        "taking pictures of the sunset over the sea on the beach at night.\n"
        "###Human: What is the location of the scene?\n"
        "###Assistant: The scene is located on a beach at night near the sea.\n"
        "###Human: Can you tell me about any changes that happen in the video over time?\n"
        "###Assistant: The color of the sky changes from orange to grey as the video progresses. "
        "Additionally, the actions of the silhouettes of people change as they take pictures and look "
        "at their phones on the beach.";
    return text;
}

std::string mock_reply(const std::string& prompt) {
    static const std::string post_prefix = render(TemplateId::PostProcess, {}) + "\n\n";
    static const std::string conversation_prefix = render(TemplateId::ConversationGen, {});
    if (prompt.starts_with("Give you a video of ")) return mock_description_text();
    if (prompt.starts_with(post_prefix)) return prompt.substr(post_prefix.size());
    if (prompt.starts_with(conversation_prefix)) return mock_dialogue_text();
    return last_words(prompt, 8);
}

std::string MockLlmClient::complete(const std::string& prompt, const LlmParams&, const ChunkSink& sink) {
    auto answer = mock_reply(prompt);
    std::uint64_t h = fnv1a(prompt);
    for (std::size_t pos = 0; pos < answer.size();) {
        std::size_t size = 1 + h % 16;
        h = h * 6364136223846793005ULL + 1442695040888963407ULL;
        auto chunk = std::string_view(answer).substr(pos, size);
        if (sink) sink(chunk);
        pos += chunk.size();
    }
    return answer;
}

HttpLlmClient::HttpLlmClient(std::string endpoint, std::string api_key_env,
                             std::chrono::milliseconds timeout, bool stream)
    : endpoint_(std::move(endpoint)),
      api_key_env_(std::move(api_key_env)),
      timeout_(timeout),
      stream_(stream) {
    (void)detail::split_url(endpoint_);
}

std::string HttpLlmClient::complete(const std::string& prompt, const LlmParams& params,
                                    const ChunkSink& sink) {
    auto url = detail::split_url(endpoint_);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Request req;
    req.method = "POST";
    req.path = url.path;
    req.set_header("Content-Type", "application/json");
    if (const char* key = std::getenv(api_key_env_.c_str()); key && *key) {
        req.set_header("Authorization", std::string("Bearer ") + key);
    }
    req.body = json{{"model", params.model_id},
                    {"prompt", prompt},
                    {"temperature", params.temperature},
                    {"max_tokens", params.max_output_tokens},
                    {"stream", stream_}}
                   .dump();

    int status = 0;
    std::string pending;  // bytes after the last complete line
    std::string raw;      // whole body, for errors and non-streaming replies
    std::string answer;
    bool done = false;
    std::string stream_error;

    auto handle_line = [&](const std::string& line) {
        if (line.empty()) return;
        json event = json::parse(line, nullptr, false);
        if (event.is_discarded() || !event.is_object()) {
            stream_error = "malformed stream event";
            return;
        }
        if (auto it = event.find("delta"); it != event.end() && it->is_string()) {
            auto chunk = it->get<std::string>();
            answer += chunk;
            if (sink) sink(chunk);
        }
        if (auto it = event.find("error"); it != event.end()) stream_error = it->dump();
        if (event.value("done", false)) done = true;
    };

    req.response_handler = [&](const httplib::Response& r) {
        status = r.status;
        return true;
    };
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
        raw.append(data, len);
        if (!stream_ || status < 200 || status >= 300) return true;
        pending.append(data, len);
        for (auto nl = pending.find('\n'); nl != std::string::npos; nl = pending.find('\n')) {
            handle_line(pending.substr(0, nl));
            pending.erase(0, nl + 1);
        }
        return stream_error.empty();
    };

    auto res = client.send(req);
    if (!res && stream_error.empty()) {
        fail(ErrorCode::Transport, "LLM request failed: " + httplib::to_string(res.error()));
    }
    if (status < 200 || status >= 300) {
        fail(ErrorCode::Transport, "LLM endpoint returned HTTP " + std::to_string(status) + ": " + raw);
    }
    if (!stream_) {
        json reply = json::parse(raw, nullptr, false);
        if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string()) {
            fail(ErrorCode::Transport, "LLM reply has no text field");
        }
        answer = reply["text"].get<std::string>();
        if (sink) sink(answer);
        return answer;
    }
    if (!pending.empty()) handle_line(pending);
    if (!stream_error.empty()) fail(ErrorCode::Transport, "LLM stream error: " + stream_error);
    if (!done) fail(ErrorCode::Transport, "LLM stream ended without a done event");
    return answer;
}

}  // namespace vchat
