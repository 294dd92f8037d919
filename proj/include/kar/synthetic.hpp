#pragma once

#include <cstdint>
#include <string>

namespace kar {

// MovieLens-format corpora for offline runs and tests. Both emit
// ratings.dat / users.dat / movies.dat under dir.

// Labels follow a latent user-item topic match that never appears in the
// categorical features; knowledge.jsonl (written alongside) carries texts
// that reveal each entity's topic, so the signal is reachable only through
// the knowledge path for users and items unseen in training.
struct TopicDatasetConfig {
    int n_users = 600;
    int n_items = 400;
    int n_topics = 8;
    int per_user = 30;
    double p_match = 0.85;     // P(positive | topics match)
    double p_mismatch = 0.15;  // P(positive | topics differ)
    std::uint64_t seed = 7;
};

void write_topic_dataset(const std::string& dir, const TopicDatasetConfig& cfg);

// Ratings driven by per-item quality and per-user bias; item-id embeddings
// alone carry strong signal, which makes first-epoch loss drops easy to
// check without real data.
struct BiasDatasetConfig {
    int n_users = 1200;
    int n_items = 1500;
    int per_user = 50;
    std::uint64_t seed = 11;
};

void write_bias_dataset(const std::string& dir, const BiasDatasetConfig& cfg);

}  // namespace kar
