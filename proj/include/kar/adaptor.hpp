#pragma once

#include <string>
#include <vector>

#include "kar/tensor.hpp"

namespace kar {

class Rng;

// Semantic-space (dim m) to recommendation-space (dim q) transform: shared
// plus dedicated expert MLPs mixed by a softmax gate per knowledge side.
// The user gate spans [shared..., preference-dedicated...]; the item gate
// spans [shared..., item-dedicated...], in that concatenation order.

enum class AdaptorVariant { Mlp, Moe, Hybrid };

AdaptorVariant parse_adaptor_variant(const std::string& name);
const char* adaptor_variant_name(AdaptorVariant v);

struct AdaptorConfig {
    int input_dim = 64;           // m
    int output_dim = 32;          // q
    int shared_experts = 2;       // n_s
    int preference_experts = 5;   // n_p
    int item_experts = 5;         // n_i
    std::vector<int> hidden = {128, 32};
    AdaptorVariant variant = AdaptorVariant::Hybrid;

    // Counts after variant mapping: mlp collapses to one shared expert,
    // moe drops the shared pool.
    int effective_shared() const;
    int effective_preference() const;
    int effective_item() const;
    void validate() const;
};

class Adaptor {
public:
    Adaptor(const AdaptorConfig& cfg, nn::ParameterStore& params, Rng& rng,
            const std::string& prefix = "adaptor");

    // rep: (B, m) -> (B, q)
    nn::Tensor forward_user(nn::Graph& g, nn::Tensor rep) const;
    nn::Tensor forward_item(nn::Graph& g, nn::Tensor rep) const;

    // Softmax gate weights, (B, n_s + n_dedicated); exposed for tests.
    nn::Tensor gate_user(nn::Graph& g, nn::Tensor rep) const;
    nn::Tensor gate_item(nn::Graph& g, nn::Tensor rep) const;

    const AdaptorConfig& config() const { return cfg_; }
    int user_expert_count() const { return cfg_.effective_shared() + cfg_.effective_preference(); }
    int item_expert_count() const { return cfg_.effective_shared() + cfg_.effective_item(); }

private:
    struct ExpertParams {
        std::vector<nn::Parameter*> ws;
        std::vector<nn::Parameter*> bs;
    };
    struct GateParams {
        nn::Parameter* w = nullptr;
        nn::Parameter* b = nullptr;
    };

    ExpertParams make_expert(nn::ParameterStore& params, Rng& rng,
                             const std::string& name) const;
    nn::Tensor run_expert(nn::Graph& g, const ExpertParams& e, nn::Tensor x) const;
    nn::Tensor mix(nn::Graph& g, nn::Tensor rep,
                   const std::vector<const ExpertParams*>& experts,
                   const GateParams& gate) const;
    nn::Tensor gate_weights(nn::Graph& g, nn::Tensor rep, const GateParams& gate) const;

    AdaptorConfig cfg_;
    std::vector<ExpertParams> shared_, pref_, item_;
    GateParams gate_user_, gate_item_;
};

}  // namespace kar
