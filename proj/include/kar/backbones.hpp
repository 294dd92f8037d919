#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kar/dataset.hpp"
#include "kar/tensor.hpp"

namespace kar {

class Rng;

enum class BackboneKind { DeepFm, DcnV2, Din };
enum class AugMode { None, Fact, Reasoning, Both };

BackboneKind parse_backbone_kind(const std::string& name);
const char* backbone_kind_name(BackboneKind k);
AugMode parse_aug_mode(const std::string& name);
const char* aug_mode_name(AugMode m);

inline bool mode_uses_user(AugMode m) { return m == AugMode::Reasoning || m == AugMode::Both; }
inline bool mode_uses_item(AugMode m) { return m == AugMode::Fact || m == AugMode::Both; }

struct BackboneConfig {
    BackboneKind kind = BackboneKind::Din;
    int embedding_dim = 32;                  // d
    std::vector<int> mlp_sizes = {200, 80};  // output-layer hidden sizes
    int cross_layers = 3;                    // dcnv2
    std::vector<int> attention_sizes = {80, 40};  // din score net hidden sizes
    AugMode mode = AugMode::None;
    int aug_dim = 32;  // q of incoming augmented vectors

    void validate() const;
};

struct ModelMeta {
    std::array<std::int32_t, data::kNumFields> vocab_sizes{};
    std::int32_t rating_vocab_size = 6;
    std::int32_t max_history = 0;

    static ModelMeta from(const data::SampleSet& set);
};

// Assembled model input: per-field index columns, position-major padded
// history, pooling masks, labels, and (per mode) resolved knowledge inputs.
struct Batch {
    std::array<std::vector<std::int32_t>, data::kNumFields> fields;
    std::vector<std::vector<std::int32_t>> hist_movie;   // [position][row]
    std::vector<std::vector<std::int32_t>> hist_cat;
    std::vector<std::vector<std::int32_t>> hist_rating;
    nn::Mat hist_mean_w;   // (B,H): mask / count, rows with no history all zero
    nn::Mat att_mask_add;  // (B,H): 0 for real items, -1e30 for padding
    nn::Mat has_hist;      // (B,1): 1 when history non-empty
    std::vector<double> labels;
    std::vector<std::int32_t> user_ref;  // into SampleSet entity tables
    std::vector<std::int32_t> item_ref;

    // Filled by the pipeline according to the run mode.
    nn::Mat rep_user, rep_item;  // (B,m) knowledge representations
    nn::Mat aug_user, aug_item;  // (B,q) prestored augmented vectors

    Eigen::Index rows() const { return static_cast<Eigen::Index>(labels.size()); }
};

Batch make_batch(const data::SampleSet& set, const std::vector<data::Sample>& samples,
                 std::span<const std::size_t> idx);

// ---- interaction primitives ------------------------------------------

// Sum over unordered field pairs of <v_i, v_j> via the half-square identity;
// inputs are (B,d) each, output (B,1). Needs at least two fields.
nn::Tensor fm_second_order(const std::vector<nn::Tensor>& field_embeddings);

// x_{l+1} = x0 .* (x_l W + b) + x_l (full-matrix DCNv2 form).
nn::Tensor cross_layer(nn::Tensor x0, nn::Tensor x_l, nn::Tensor w, nn::Tensor b);

struct AttentionParams {
    std::vector<nn::Parameter*> ws;
    std::vector<nn::Parameter*> bs;
};

// Per-item scores from an MLP over [h, t, h-t, h.*t], softmax-normalized
// over real history positions; empty history yields a zero vector.
nn::Tensor din_attention(nn::Graph& g, nn::Tensor target,
                         const std::vector<nn::Tensor>& history,
                         const nn::Mat& att_mask_add, const nn::Mat& has_hist,
                         const AttentionParams& att);

// ---- backbones ---------------------------------------------------------

class Backbone {
public:
    Backbone(const BackboneConfig& cfg, const ModelMeta& meta,
             nn::ParameterStore& params, Rng& rng, std::string prefix);
    virtual ~Backbone() = default;

    // Returns click probabilities (B,1). Augmented tensors must be valid
    // exactly when the mode calls for them; they join the interaction
    // layer as extra fields.
    nn::Tensor forward(nn::Graph& g, const Batch& b,
                       nn::Tensor aug_user = {}, nn::Tensor aug_item = {});

    // Fields seen by the feature-interaction layer under the current mode.
    int interaction_field_count() const;

    const BackboneConfig& config() const { return cfg_; }

protected:
    struct Inputs {
        std::vector<nn::Tensor> field_embs;  // per categorical field, (B,d)
        std::vector<nn::Tensor> history;     // per position, (B,d)
        std::vector<nn::Tensor> augmented;   // 0-2 entries, already (B,d)-bridged
    };

    virtual nn::Tensor logits(nn::Graph& g, const Batch& b, const Inputs& in) = 0;

    // Mask-weighted mean over history positions; zero rows when empty.
    nn::Tensor mean_pooled_history(nn::Graph& g, const Batch& b, const Inputs& in) const;

    struct MlpParams {
        std::vector<nn::Parameter*> ws;
        std::vector<nn::Parameter*> bs;
    };
    MlpParams make_mlp(nn::ParameterStore& params, Rng& rng, const std::string& name,
                       int in_dim, const std::vector<int>& hidden, int out_dim);
    static nn::Tensor run_mlp(nn::Graph& g, const MlpParams& mlp, nn::Tensor x);

    BackboneConfig cfg_;
    ModelMeta meta_;
    std::string prefix_;
    std::array<nn::Parameter*, data::kNumFields> emb_{};
    nn::Parameter* emb_rating_ = nullptr;
    nn::Parameter* bridge_user_w_ = nullptr;  // only when aug_dim != embedding_dim
    nn::Parameter* bridge_user_b_ = nullptr;
    nn::Parameter* bridge_item_w_ = nullptr;
    nn::Parameter* bridge_item_b_ = nullptr;
};

class DeepFmModel final : public Backbone {
public:
    DeepFmModel(const BackboneConfig& cfg, const ModelMeta& meta,
                nn::ParameterStore& params, Rng& rng, const std::string& prefix);

protected:
    nn::Tensor logits(nn::Graph& g, const Batch& b, const Inputs& in) override;

private:
    std::array<nn::Parameter*, data::kNumFields> first_order_{};
    nn::Parameter* bias_ = nullptr;
    MlpParams mlp_;
};

class DcnV2Model final : public Backbone {
public:
    DcnV2Model(const BackboneConfig& cfg, const ModelMeta& meta,
               nn::ParameterStore& params, Rng& rng, const std::string& prefix);

protected:
    nn::Tensor logits(nn::Graph& g, const Batch& b, const Inputs& in) override;

private:
    std::vector<nn::Parameter*> cross_w_, cross_b_;
    MlpParams mlp_;
};

class DinModel final : public Backbone {
public:
    DinModel(const BackboneConfig& cfg, const ModelMeta& meta,
             nn::ParameterStore& params, Rng& rng, const std::string& prefix);

protected:
    nn::Tensor logits(nn::Graph& g, const Batch& b, const Inputs& in) override;

private:
    AttentionParams att_;
    MlpParams mlp_;
};

std::unique_ptr<Backbone> make_backbone(const BackboneConfig& cfg, const ModelMeta& meta,
                                        nn::ParameterStore& params, Rng& rng,
                                        const std::string& prefix = "backbone");

}  // namespace kar
