#include "kar/adaptor.hpp"

#include "kar/rng.hpp"

namespace kar {

using nn::Tensor;

AdaptorVariant parse_adaptor_variant(const std::string& name) {
    if (name == "mlp") return AdaptorVariant::Mlp;
    if (name == "moe") return AdaptorVariant::Moe;
    if (name == "hybrid") return AdaptorVariant::Hybrid;
    fail_config("unknown adaptor variant: " + name);
}

const char* adaptor_variant_name(AdaptorVariant v) {
    switch (v) {
    case AdaptorVariant::Mlp: return "mlp";
    case AdaptorVariant::Moe: return "moe";
    case AdaptorVariant::Hybrid: return "hybrid";
    }
    return "?";
}

int AdaptorConfig::effective_shared() const {
    switch (variant) {
    case AdaptorVariant::Mlp: return 1;
    case AdaptorVariant::Moe: return 0;
    case AdaptorVariant::Hybrid: return shared_experts;
    }
    return shared_experts;
}

int AdaptorConfig::effective_preference() const {
    return variant == AdaptorVariant::Mlp ? 0 : preference_experts;
}

int AdaptorConfig::effective_item() const {
    return variant == AdaptorVariant::Mlp ? 0 : item_experts;
}

void AdaptorConfig::validate() const {
    if (input_dim < 1 || output_dim < 1)
        fail_config("adaptor dims must be positive");
    if (shared_experts < 0 || preference_experts < 0 || item_experts < 0)
        fail_config("adaptor expert counts must be >= 0");
    if (effective_shared() + effective_preference() < 1 ||
        effective_shared() + effective_item() < 1)
        fail_config("adaptor needs at least one expert per knowledge side");
    for (int h : hidden)
        if (h < 1) fail_config("adaptor hidden sizes must be positive");
}

Adaptor::ExpertParams Adaptor::make_expert(nn::ParameterStore& params, Rng& rng,
                                           const std::string& name) const {
    ExpertParams e;
    int in = cfg_.input_dim;
    std::vector<int> sizes = cfg_.hidden;
    sizes.push_back(cfg_.output_dim);
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        const int out = sizes[l];
        e.ws.push_back(&params.create(name + ".w" + std::to_string(l),
                                      nn::xavier_uniform(rng, in, out)));
        e.bs.push_back(&params.create(name + ".b" + std::to_string(l),
                                      nn::Mat::Zero(1, out)));
        in = out;
    }
    return e;
}

Adaptor::Adaptor(const AdaptorConfig& cfg, nn::ParameterStore& params, Rng& rng,
                 const std::string& prefix)
    : cfg_(cfg) {
    cfg_.validate();
    for (int k = 0; k < cfg_.effective_shared(); ++k)
        shared_.push_back(make_expert(params, rng, prefix + ".shared." + std::to_string(k)));
    for (int k = 0; k < cfg_.effective_preference(); ++k)
        pref_.push_back(make_expert(params, rng, prefix + ".pref." + std::to_string(k)));
    for (int k = 0; k < cfg_.effective_item(); ++k)
        item_.push_back(make_expert(params, rng, prefix + ".item." + std::to_string(k)));

    const int n_user = user_expert_count();
    const int n_item = item_expert_count();
    gate_user_.w = &params.create(prefix + ".gate.user.w",
                                  nn::xavier_uniform(rng, cfg_.input_dim, n_user));
    gate_user_.b = &params.create(prefix + ".gate.user.b", nn::Mat::Zero(1, n_user));
    gate_item_.w = &params.create(prefix + ".gate.item.w",
                                  nn::xavier_uniform(rng, cfg_.input_dim, n_item));
    gate_item_.b = &params.create(prefix + ".gate.item.b", nn::Mat::Zero(1, n_item));
}

Tensor Adaptor::run_expert(nn::Graph& g, const ExpertParams& e, Tensor x) const {
    Tensor h = x;
    for (std::size_t l = 0; l < e.ws.size(); ++l) {
        h = nn::affine(h, g.param(*e.ws[l]), g.param(*e.bs[l]));
        if (l + 1 < e.ws.size()) h = nn::relu(h);  // hidden layers only
    }
    return h;
}

Tensor Adaptor::gate_weights(nn::Graph& g, Tensor rep, const GateParams& gate) const {
    if (rep.cols() != cfg_.input_dim)
        fail_numeric("adaptor: rep dim " + nn::shape_str(rep.value()) +
                     " does not match input dim " + std::to_string(cfg_.input_dim));
    return nn::softmax(nn::affine(rep, g.param(*gate.w), g.param(*gate.b)), 1);
}

Tensor Adaptor::mix(nn::Graph& g, Tensor rep,
                    const std::vector<const ExpertParams*>& experts,
                    const GateParams& gate) const {
    Tensor weights = gate_weights(g, rep, gate);
    Tensor out;
    for (std::size_t e = 0; e < experts.size(); ++e) {
        Tensor w_e = nn::slice_cols(weights, static_cast<Eigen::Index>(e), 1);
        Tensor term = nn::scale_rows(run_expert(g, *experts[e], rep), w_e);
        out = out.valid() ? nn::add(out, term) : term;
    }
    return out;
}

Tensor Adaptor::forward_user(nn::Graph& g, Tensor rep) const {
    std::vector<const ExpertParams*> experts;
    for (const auto& e : shared_) experts.push_back(&e);
    for (const auto& e : pref_) experts.push_back(&e);
    return mix(g, rep, experts, gate_user_);
}

Tensor Adaptor::forward_item(nn::Graph& g, Tensor rep) const {
    std::vector<const ExpertParams*> experts;
    for (const auto& e : shared_) experts.push_back(&e);
    for (const auto& e : item_) experts.push_back(&e);
    return mix(g, rep, experts, gate_item_);
}

Tensor Adaptor::gate_user(nn::Graph& g, Tensor rep) const {
    return gate_weights(g, rep, gate_user_);
}

Tensor Adaptor::gate_item(nn::Graph& g, Tensor rep) const {
    return gate_weights(g, rep, gate_item_);
}

}  // namespace kar
