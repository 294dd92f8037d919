#include "kar/prompting.hpp"

#include <set>
#include <sstream>

#include "kar/error.hpp"
#include "kar/llm.hpp"
#include "kar/rng.hpp"

namespace kar {

void ScenarioFactors::validate() const {
    if (names.empty()) fail_config("scenario factors must be non-empty");
    std::set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second) fail_config("duplicate scenario factor: " + n);
}

std::string ScenarioFactors::joined() const {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    return out;
}

ScenarioFactors ScenarioFactors::movie_defaults() {
    return {"movie",
            {"genre", "actors", "directors", "theme", "mood", "production quality",
             "critical acclaim"}};
}

ScenarioFactors ScenarioFactors::news_defaults() {
    return {"news",
            {"topic", "source", "region", "style", "freshness", "clarity", "impact"}};
}

std::uint64_t PromptRequest::prompt_hash() const { return fnv1a64(text); }

std::string PromptRequest::prompt_hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(prompt_hash()));
    return buf;
}

PromptRequest build_preference_prompt(const std::string& entity_id,
                                      const std::vector<std::string>& profile,
                                      const std::vector<HistoryLine>& history,
                                      const ScenarioFactors& factors) {
    factors.validate();
    std::ostringstream os;
    os << "Preference analysis request for the " << factors.scenario << " scenario.\n";
    os << "User profile: ";
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (i) os << "; ";
        os << profile[i];
    }
    os << ".\n";
    if (history.empty()) {
        os << "The user has no prior interaction history.\n";
    } else {
        os << "Interaction history, oldest first:\n";
        for (std::size_t i = 0; i < history.size(); ++i) {
            const HistoryLine& h = history[i];
            os << (i + 1) << ". " << h.title << " (" << h.category << ") — rated "
               << h.rating << "/5\n";
        }
    }
    os << "Scenario factors: " << factors.joined() << ".\n";
    os << "Analyze the user's preferences with respect to each factor listed above, "
          "citing evidence from the profile and history, then summarize the user's "
          "overall taste.";
    return PromptRequest{Kind::Preference, entity_id, os.str()};
}

PromptRequest build_item_prompt(const std::string& entity_id,
                                const std::vector<std::string>& item_desc,
                                const ScenarioFactors& factors) {
    factors.validate();
    std::ostringstream os;
    os << "Item knowledge request for the " << factors.scenario << " scenario.\n";
    os << "Target item: ";
    for (std::size_t i = 0; i < item_desc.size(); ++i) {
        if (i) os << "; ";
        os << item_desc[i];
    }
    os << ".\n";
    os << "Scenario factors: " << factors.joined() << ".\n";
    os << "Describe this item with respect to each factor listed above, providing "
          "factual attributes that help match it to user preferences.";
    return PromptRequest{Kind::ItemFactual, entity_id, os.str()};
}

std::string factor_elicitation_prompt(const std::string& scenario) {
    return "List the important factors or features that determine whether a user "
           "will be interested in a " + scenario + ". Answer with one factor per line.";
}

std::vector<std::string> parse_factor_list(const std::string& response) {
    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        s.erase(0, s.find_first_not_of(ws));
        const auto last = s.find_last_not_of(ws);
        s.erase(last == std::string::npos ? 0 : last + 1);
        return s;
    };
    auto strip_marker = [&trim](std::string s) {
        // "1." / "2)" / "-" / "*" prefixes
        std::size_t i = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
            s = s.substr(i + 1);
        } else if (!s.empty() && (s[0] == '-' || s[0] == '*')) {
            s = s.substr(1);
        }
        return trim(std::move(s));
    };

    std::vector<std::string> lines;
    std::istringstream is(response);
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) lines.push_back(line);
    }

    std::vector<std::string> factors;
    if (lines.size() == 1 && lines[0].find(',') != std::string::npos) {
        std::istringstream ls(lines[0]);
        std::string part;
        while (std::getline(ls, part, ',')) {
            part = trim(part);
            if (!part.empty()) factors.push_back(part);
        }
    } else {
        for (auto& l : lines) {
            std::string f = strip_marker(l);
            if (!f.empty()) factors.push_back(std::move(f));
        }
    }
    if (factors.empty())
        fail_data("could not parse factor list from response: \"" + response + "\"");
    return factors;
}

ScenarioFactors elicit_factors(const std::string& scenario, LlmClient& llm,
                               const std::vector<std::string>& override_names) {
    ScenarioFactors out;
    out.scenario = scenario;
    if (!override_names.empty()) {
        out.names = override_names;
        out.validate();
        return out;
    }
    const std::string response = llm.complete(factor_elicitation_prompt(scenario));
    out.names = parse_factor_list(response);
    out.validate();
    return out;
}

}  // namespace kar
