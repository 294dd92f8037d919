#include "kar/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "kar/error.hpp"
#include "kar/rng.hpp"

namespace kar {

namespace {

const char* kGenres[] = {"Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi"};
const char* kAges[] = {"1", "18", "25", "35", "45", "50", "56"};

std::ofstream open_trunc(const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail_data("cannot write " + path);
    return os;
}

void write_users(const std::string& dir, int n_users, Rng& rng) {
    auto os = open_trunc(dir + "/users.dat");
    for (int u = 1; u <= n_users; ++u) {
        os << u << "::" << (rng.bernoulli(0.5) ? "M" : "F") << "::"
           << kAges[rng.uniform_int(0, 6)] << "::" << rng.uniform_int(0, 20)
           << "::00000\n";
    }
}

void write_movies(const std::string& dir, int n_items, Rng& rng) {
    auto os = open_trunc(dir + "/movies.dat");
    for (int i = 1; i <= n_items; ++i) {
        os << i << "::Item " << i << " (" << (1980 + rng.uniform_int(0, 39)) << ")::"
           << kGenres[rng.uniform_int(0, 5)] << "\n";
    }
}

std::vector<int> sample_distinct(Rng& rng, int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 1);
    rng.shuffle(pool);
    pool.resize(static_cast<std::size_t>(std::min(n, k)));
    return pool;
}

}  // namespace

void write_topic_dataset(const std::string& dir, const TopicDatasetConfig& cfg) {
    std::filesystem::create_directories(dir);
    Rng rng(derive_seed(cfg.seed, "topic-dataset"));

    write_users(dir, cfg.n_users, rng);
    write_movies(dir, cfg.n_items, rng);

    std::vector<int> user_topic(static_cast<std::size_t>(cfg.n_users));
    std::vector<int> item_topic(static_cast<std::size_t>(cfg.n_items));
    for (auto& t : user_topic) t = static_cast<int>(rng.uniform_int(0, cfg.n_topics - 1));
    for (auto& t : item_topic) t = static_cast<int>(rng.uniform_int(0, cfg.n_topics - 1));

    {
        auto os = open_trunc(dir + "/ratings.dat");
        std::int64_t ts = 978300000;
        for (int u = 1; u <= cfg.n_users; ++u) {
            for (int item : sample_distinct(rng, cfg.n_items, cfg.per_user)) {
                const bool match =
                    user_topic[static_cast<std::size_t>(u - 1)] ==
                    item_topic[static_cast<std::size_t>(item - 1)];
                const bool positive = rng.bernoulli(match ? cfg.p_match : cfg.p_mismatch);
                const int rating = positive ? static_cast<int>(rng.uniform_int(4, 5))
                                            : static_cast<int>(rng.uniform_int(1, 3));
                os << u << "::" << item << "::" << rating << "::" << ts++ << "\n";
            }
        }
    }

    {
        auto os = open_trunc(dir + "/knowledge.jsonl");
        auto emit = [&os](const std::string& id, const char* kind, const std::string& text) {
            nlohmann::json j = {{"entity_id", id},
                                {"kind", kind},
                                {"prompt_hash", ""},
                                {"text", text},
                                {"provenance", "stub"}};
            os << j.dump() << "\n";
        };
        for (int u = 1; u <= cfg.n_users; ++u) {
            const std::string t = "topic_" + std::to_string(user_topic[static_cast<std::size_t>(u - 1)]);
            emit(std::to_string(u), "preference",
                 "long horizon preference profile . the user leans toward " + t + " " + t +
                     " " + t + " works . stable taste signal across history .");
        }
        for (int i = 1; i <= cfg.n_items; ++i) {
            const std::string t = "topic_" + std::to_string(item_topic[static_cast<std::size_t>(i - 1)]);
            emit(std::to_string(i), "item_factual",
                 "catalog entry . this item belongs to the " + t + " " + t + " " + t +
                     " cluster . attributes stable over time .");
        }
    }
}

void write_bias_dataset(const std::string& dir, const BiasDatasetConfig& cfg) {
    std::filesystem::create_directories(dir);
    Rng rng(derive_seed(cfg.seed, "bias-dataset"));

    write_users(dir, cfg.n_users, rng);
    write_movies(dir, cfg.n_items, rng);

    std::vector<double> quality(static_cast<std::size_t>(cfg.n_items));
    std::vector<double> bias(static_cast<std::size_t>(cfg.n_users));
    for (auto& q : quality) q = rng.normal(0.0, 1.2);
    for (auto& b : bias) b = rng.normal(0.0, 0.6);

    auto os = open_trunc(dir + "/ratings.dat");
    std::int64_t ts = 978300000;
    for (int u = 1; u <= cfg.n_users; ++u) {
        for (int item : sample_distinct(rng, cfg.n_items, cfg.per_user)) {
            const double score = 3.6 + quality[static_cast<std::size_t>(item - 1)] +
                                 bias[static_cast<std::size_t>(u - 1)] + rng.normal(0.0, 0.3);
            const int rating = std::clamp(static_cast<int>(std::lround(score)), 1, 5);
            os << u << "::" << item << "::" << rating << "::" << ts++ << "\n";
        }
    }
}

}  // namespace kar
