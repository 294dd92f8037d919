#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kar/adaptor.hpp"
#include "kar/backbones.hpp"
#include "kar/checkpoint.hpp"
#include "kar/config.hpp"
#include "kar/dataset.hpp"
#include "kar/knowledge_store.hpp"
#include "kar/vector_cache.hpp"

namespace kar {

struct EpochStats {
    int epoch = 0;
    double train_logloss = 0.0;
    double first_batches_logloss = 0.0;  // mean over the first 10 batches
    double last_batches_logloss = 0.0;   // mean over the last 10 batches
    double test_auc = 0.0;
    double test_logloss = 0.0;
    double seconds = 0.0;
};

struct MetricsReport {
    double auc = 0.0;      // final epoch, full test split
    double logloss = 0.0;
    std::vector<EpochStats> epochs;
    double train_seconds = 0.0;
};

// Final metrics formatted to the digits the determinism criterion compares.
std::string format_final_metrics(const MetricsReport& r);

// Backbone plus (mode-dependent) adaptor sharing one parameter store so the
// two are jointly optimized. With use_prestored the adaptor is detached and
// augmented vectors come straight from the batch.
class KarModel {
public:
    KarModel(const RunConfig& cfg, const ModelMeta& meta, int rep_dim);

    nn::Tensor forward(nn::Graph& g, const Batch& b) const;

    nn::ParameterStore& params() { return params_; }
    Backbone& backbone() { return *backbone_; }
    Adaptor* adaptor() { return adaptor_.get(); }
    AugMode mode() const { return mode_; }

private:
    AugMode mode_;
    bool prestored_;
    nn::ParameterStore params_;
    std::unique_ptr<Backbone> backbone_;
    std::unique_ptr<Adaptor> adaptor_;
};

// Resolves per-sample knowledge inputs (representations or prestored
// augmented vectors) from vector caches, keyed by the sample entity tables.
class KnowledgeInputs {
public:
    // Loads the caches the mode requires; missing entries are data errors
    // naming the entity and cache path.
    KnowledgeInputs(const RunConfig& cfg, const data::SampleSet& set);

    void fill(Batch& b) const;
    int rep_dim() const { return rep_dim_; }

private:
    AugMode mode_ = AugMode::None;
    bool prestored_ = false;
    int rep_dim_ = 0;
    nn::Mat user_rows_, item_rows_;  // aligned with SampleSet entity tables
};

std::uint64_t test_identity_hash(const data::SampleSet& set);

struct TrainArtifacts {
    MetricsReport report;
    std::uint64_t test_hash = 0;
};

// Loads samples, trains per config (joint backbone+adaptor when mode != none),
// evaluates per epoch, writes checkpoint/report when paths are set.
TrainArtifacts train(const RunConfig& cfg);

struct AblationRow {
    std::string mode;
    MetricsReport report;
    std::uint64_t test_hash = 0;
};

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<AugMode>& modes = {
                                          AugMode::None, AugMode::Fact,
                                          AugMode::Reasoning, AugMode::Both});

std::string format_ablation_table(const std::vector<AblationRow>& rows);

struct BenchRow {
    std::string variant;  // base | kar_with_adaptor | kar_prestored
    double mean_s = 0.0;
    double std_s = 0.0;
    int batches = 0;
};

// Forward-only per-batch timings over prebuilt batches (inputs pre-resolved;
// warm-up excluded).
std::vector<BenchRow> bench_inference(const RunConfig& cfg);

std::string format_bench_table(const std::vector<BenchRow>& rows);

// Runs the trained adaptor over every cached representation and prestores
// the resulting augmented vectors.
void export_augmented(const RunConfig& cfg);

// ---- knowledge generation driver --------------------------------------

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& cfg,
                                           const ScenarioFactors& factors);

// Renders preference prompts for every user and item prompts for every item
// referenced by the sample set.
std::vector<PromptRequest> build_all_prompts(const data::MovieLensRaw& raw,
                                             const data::SampleSet& set,
                                             const ScenarioFactors& factors,
                                             int max_history);

void save_prompts(const std::string& path, const std::vector<PromptRequest>& prompts);
std::vector<PromptRequest> load_prompts(const std::string& path);

// Bounded-parallel generation into the store (worker threads; serialized
// writes). Returns the number of newly generated records.
std::size_t generate_all(const std::vector<PromptRequest>& prompts, LlmClient& llm,
                         const RetryPolicy& policy, KnowledgeStore& store, int workers);

// Encodes every stored knowledge text into cache records (f32).
std::vector<VectorRecord> encode_store(const KnowledgeStore& store,
                                       const TokenEncoder& encoder, Aggregation agg);

}  // namespace kar
