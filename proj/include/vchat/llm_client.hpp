#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace vchat {

struct LlmParams {
    std::string model_id = "mock";
    double temperature = 0.0;
    int max_output_tokens = 512;
    std::size_t context_budget_chars = 32000;

    bool operator==(const LlmParams&) const = default;
};

void validate_params(const LlmParams& params);

using ChunkSink = std::function<void(std::string_view)>;

/// complete() streams the answer through `sink` in order and returns the full
/// answer; the concatenated chunks must equal the return value. Failures
/// throw Error(Transport).
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt, const LlmParams& params,
                                 const ChunkSink& sink) = 0;
};

/// Calls the client, checks the stream against the returned answer, and
/// returns it. Any mismatch or non-library exception becomes Error(Transport).
std::string complete_checked(LlmClient& client, const std::string& prompt, const LlmParams& params,
                             const ChunkSink& sink = nullptr);

/// Deterministic offline model. A pure function of (prompt, params):
///   DetailedDescription prompts -> a fixed 170-word sequence-adverb narrative
///   PostProcess prompts         -> the paragraph under repair, unchanged
///   ConversationGen prompts     -> a fixed 4-round ###Human/###Assistant dialogue
///   anything else               -> the last 8 words of the prompt
/// Chunk boundaries vary with the prompt hash.
class MockLlmClient final : public LlmClient {
public:
    std::string complete(const std::string& prompt, const LlmParams& params,
                         const ChunkSink& sink) override;
};

std::string mock_reply(const std::string& prompt);
std::string last_words(std::string_view text, std::size_t count);

/// Canned outputs of the mock, exposed for tests.
const std::string& mock_description_text();
const std::string& mock_dialogue_text();

/// HTTP client for the LLM wire protocol:
///   POST {model, prompt, temperature, max_tokens, stream}
///   reply: newline-delimited events {"delta": "..."} ... {"done": true}
///          or {"error": "..."}; non-streaming replies are {"text": "..."}.
/// The API key is read from the named environment variable and sent as a
/// bearer token when set.
class HttpLlmClient final : public LlmClient {
public:
    HttpLlmClient(std::string endpoint, std::string api_key_env = "VCHAT_LLM_API_KEY",
                  std::chrono::milliseconds timeout = std::chrono::seconds(120), bool stream = true);

    std::string complete(const std::string& prompt, const LlmParams& params,
                         const ChunkSink& sink) override;

private:
    std::string endpoint_;
    std::string api_key_env_;
    std::chrono::milliseconds timeout_;
    bool stream_;
};

}  // namespace vchat
