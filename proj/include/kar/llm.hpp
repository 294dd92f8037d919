#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kar {

// Retryable transport-level failure (connection error, 5xx, rate limit).
struct LlmTransportError : std::runtime_error {
    LlmTransportError(std::string msg, bool rate_limited_)
        : std::runtime_error(std::move(msg)), rate_limited(rate_limited_) {}
    bool rate_limited;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    // Returns the completion text; throws LlmTransportError on retryable
    // failures. May legally return an empty string (handled upstream).
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string provenance() const = 0;  // "live_llm" or "stub"
};

struct LlmConfig {
    std::string base_url;                        // e.g. http://localhost:8080
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    double temperature = 0.0;
    int max_tokens = 512;
    int timeout_s = 60;
    std::string token_env = "KAR_LLM_TOKEN";     // bearer token source
};

// Chat-completion POST: {"model", "messages":[{"role":"user","content"}],
// "temperature", "max_tokens"}; reads choices[0].message.content.
class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(LlmConfig cfg);
    std::string complete(const std::string& prompt) override;
    std::string provenance() const override { return "live_llm"; }

private:
    LlmConfig cfg_;
};

// Deterministic offline stand-in: expands a seeded hash of the prompt into
// pseudo-text that names the scenario factors found in (or configured for)
// the prompt.
class StubLlmClient : public LlmClient {
public:
    explicit StubLlmClient(std::vector<std::string> factors = {}, std::uint64_t seed = 0);
    std::string complete(const std::string& prompt) override;
    std::string provenance() const override { return "stub"; }

private:
    std::vector<std::string> factors_;
    std::uint64_t seed_;
};

}  // namespace kar
