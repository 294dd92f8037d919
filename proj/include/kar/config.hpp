#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kar/adaptor.hpp"
#include "kar/backbones.hpp"
#include "kar/encoding.hpp"
#include "kar/llm.hpp"

namespace kar {

// Mirrors the CLI flags; loadable from a plain key=value file ('#' comments).
struct RunConfig {
    // paths
    std::string data_dir;
    std::string samples_path;
    std::string knowledge_path;
    std::string prompts_path;
    std::string rep_cache_path;
    std::string aug_cache_path;
    std::string checkpoint_path;
    std::string base_checkpoint_path;
    std::string report_path;
    std::string factors_path;
    std::string precomputed_path;

    // dataset
    double split_ratio = 0.9;
    int max_history = 30;
    std::int64_t slice = 0;  // 0 keeps every training sample
    std::uint64_t seed = 42;

    // knowledge generation
    std::string scenario = "movie";
    std::string llm = "stub";  // stub | live
    std::string llm_base_url;
    std::string llm_api_path = "/v1/chat/completions";
    std::string llm_model = "default";
    double llm_temperature = 0.0;
    int llm_max_tokens = 512;
    int llm_timeout_s = 60;
    std::string llm_token_env = "KAR_LLM_TOKEN";
    int llm_retries = 3;
    int llm_backoff_ms = 200;
    int workers = 4;
    std::vector<std::string> factors_override;

    // encoding
    std::string encoder = "hash";  // hash | precomputed
    int encoder_dim = 64;          // m for the hashing encoder
    std::string aggregation = "avg";

    // adaptor
    std::string adaptor_variant = "hybrid";
    int shared_experts = 2;
    int preference_experts = 5;
    int item_experts = 5;
    int aug_dim = 32;  // q

    // backbone
    std::string backbone = "din";
    std::string mode = "none";
    int embedding_dim = 32;
    std::vector<int> mlp_sizes = {200, 80};
    int cross_layers = 3;
    std::vector<int> attention_sizes = {80, 40};

    // training
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 256;
    int epochs = 5;
    int patience = 1;

    // inference / bench
    bool use_prestored = false;
    int bench_batches = 50;
    int bench_warmup = 5;

    void apply_kv(const std::string& key, const std::string& value);
    void apply_file(const std::string& path);

    BackboneConfig backbone_config() const;
    AdaptorConfig adaptor_config(int rep_dim) const;
    LlmConfig llm_config() const;
    Aggregation aggregation_method() const { return parse_aggregation(aggregation); }
    AugMode aug_mode() const { return parse_aug_mode(mode); }
};

std::vector<int> parse_int_list(const std::string& s);
std::vector<std::string> parse_string_list(const std::string& s);

}  // namespace kar
