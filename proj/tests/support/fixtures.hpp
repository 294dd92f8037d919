#pragma once

#include <filesystem>
#include <string>

#include "kar/config.hpp"
#include "kar/dataset.hpp"
#include "kar/encoding.hpp"
#include "kar/knowledge_store.hpp"
#include "kar/pipeline.hpp"
#include "kar/synthetic.hpp"

// Builds a self-contained workspace from a synthetic topic corpus:
// raw files, sample file, knowledge store, and representation cache.

namespace kar::testing {

struct Workspace {
    std::string dir;
    RunConfig cfg;
};

inline Workspace make_topic_workspace(const std::string& name,
                                      const TopicDatasetConfig& tc,
                                      int max_history, int encoder_dim = 32) {
    Workspace ws;
    ws.dir = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove_all(ws.dir);
    std::filesystem::create_directories(ws.dir);

    write_topic_dataset(ws.dir, tc);

    RunConfig& cfg = ws.cfg;
    cfg.data_dir = ws.dir;
    cfg.samples_path = ws.dir + "/samples.kars";
    cfg.knowledge_path = ws.dir + "/knowledge.jsonl";
    cfg.rep_cache_path = ws.dir + "/reps.karv";
    cfg.max_history = max_history;
    cfg.encoder_dim = encoder_dim;
    cfg.seed = tc.seed;

    data::MovieLensRaw raw = data::load_movielens_dir(ws.dir);
    data::UserSplit split = data::split_by_user(raw.interactions, cfg.split_ratio, cfg.seed);
    data::BuildResult built = data::build_samples(raw, split, max_history);
    built.samples.save(cfg.samples_path);

    KnowledgeStore store = KnowledgeStore::open(cfg.knowledge_path);
    HashingEncoder encoder(encoder_dim, derive_seed(cfg.seed, "encoder"));
    auto records = encode_store(store, encoder, Aggregation::Avg);
    VectorCache::write(cfg.rep_cache_path, records);
    return ws;
}

}  // namespace kar::testing
