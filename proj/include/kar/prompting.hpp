#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kar/kinds.hpp"

namespace kar {

class LlmClient;

struct ScenarioFactors {
    std::string scenario;
    std::vector<std::string> names;  // non-empty, unique

    void validate() const;
    std::string joined() const;  // "a, b, c"

    static ScenarioFactors movie_defaults();
    static ScenarioFactors news_defaults();
};

struct PromptRequest {
    Kind kind = Kind::Preference;
    std::string entity_id;
    std::string text;

    std::uint64_t prompt_hash() const;
    std::string prompt_hash_hex() const;
};

struct HistoryLine {
    std::string title;
    std::string category;
    int rating = 0;
};

// Rendered deterministically as: profile description, enumerated history
// (or an explicit no-history clause), factor list, per-factor instruction.
PromptRequest build_preference_prompt(const std::string& entity_id,
                                      const std::vector<std::string>& profile,
                                      const std::vector<HistoryLine>& history,
                                      const ScenarioFactors& factors);

PromptRequest build_item_prompt(const std::string& entity_id,
                                const std::vector<std::string>& item_desc,
                                const ScenarioFactors& factors);

std::string factor_elicitation_prompt(const std::string& scenario);

// Accepts numbered / bulleted lines or a single comma-separated line.
// An unparseable response is a data error carrying the raw text.
std::vector<std::string> parse_factor_list(const std::string& response);

// Asks the client for scenario factors; a non-empty override list wins
// (the expert-refinement path is a config input here).
ScenarioFactors elicit_factors(const std::string& scenario, LlmClient& llm,
                               const std::vector<std::string>& override_names = {});

}  // namespace kar
