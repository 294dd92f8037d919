#include "kar/llm.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kar/error.hpp"
#include "kar/rng.hpp"

namespace kar {

HttpLlmClient::HttpLlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) fail_config("llm base url is empty");
}

std::string HttpLlmClient::complete(const std::string& prompt) {
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_s);
    client.set_read_timeout(cfg_.timeout_s);

    httplib::Headers headers;
    if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    nlohmann::json body = {
        {"model", cfg_.model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
        {"temperature", cfg_.temperature},
        {"max_tokens", cfg_.max_tokens},
    };

    auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res)
        throw LlmTransportError("llm request to " + cfg_.base_url + " failed: " +
                                    httplib::to_string(res.error()),
                                false);
    if (res->status == 429)
        throw LlmTransportError("llm rate limited (429)", true);
    if (res->status >= 500)
        throw LlmTransportError("llm server error (" + std::to_string(res->status) + ")", false);
    if (res->status != 200)
        fail_data("llm request rejected with status " + std::to_string(res->status) +
                  ": " + res->body);

    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail_data(std::string("malformed llm response: ") + e.what());
    }
}

StubLlmClient::StubLlmClient(std::vector<std::string> factors, std::uint64_t seed)
    : factors_(std::move(factors)), seed_(seed) {}

namespace {

// Pulls the factor list back out of a rendered prompt's factor line.
std::vector<std::string> factors_from_prompt(const std::string& prompt) {
    const std::string marker = "Scenario factors: ";
    const auto pos = prompt.find(marker);
    if (pos == std::string::npos) return {};
    auto end = prompt.find_first_of(".\n", pos + marker.size());
    if (end == std::string::npos) end = prompt.size();
    std::vector<std::string> names;
    std::istringstream is(prompt.substr(pos + marker.size(), end - pos - marker.size()));
    std::string part;
    while (std::getline(is, part, ',')) {
        const auto b = part.find_first_not_of(' ');
        if (b != std::string::npos) names.push_back(part.substr(b));
    }
    return names;
}

const char* kStubAdjectives[] = {"strong", "moderate", "mild", "recurring",
                                 "occasional", "pronounced", "subtle", "steady"};

}  // namespace

std::string StubLlmClient::complete(const std::string& prompt) {
    std::vector<std::string> names = factors_from_prompt(prompt);
    if (names.empty()) names = factors_;
    if (names.empty())
        names = {"genre", "actors", "directors", "theme", "mood",
                 "production quality", "critical acclaim"};

    if (prompt.rfind("List the important factors", 0) == 0) {
        std::ostringstream os;
        for (std::size_t i = 0; i < names.size(); ++i)
            os << (i + 1) << ". " << names[i] << "\n";
        return os.str();
    }

    const std::uint64_t h = mix64(fnv1a64(prompt) ^ seed_);
    std::ostringstream os;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto pick = mix64(h + i) % (sizeof(kStubAdjectives) / sizeof(char*));
        os << names[i] << ": " << kStubAdjectives[pick] << " signal." << " ";
    }
    char tag[17];
    std::snprintf(tag, sizeof(tag), "%016llx", static_cast<unsigned long long>(h));
    os << "Trace token " << tag << ".";
    return os.str();
}

}  // namespace kar
