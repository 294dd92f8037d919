#include "kar/backbones.hpp"

#include "kar/rng.hpp"

namespace kar {

using nn::Graph;
using nn::Mat;
using nn::Tensor;

BackboneKind parse_backbone_kind(const std::string& name) {
    if (name == "deepfm") return BackboneKind::DeepFm;
    if (name == "dcnv2") return BackboneKind::DcnV2;
    if (name == "din") return BackboneKind::Din;
    fail_config("unknown backbone: " + name);
}

const char* backbone_kind_name(BackboneKind k) {
    switch (k) {
    case BackboneKind::DeepFm: return "deepfm";
    case BackboneKind::DcnV2: return "dcnv2";
    case BackboneKind::Din: return "din";
    }
    return "?";
}

AugMode parse_aug_mode(const std::string& name) {
    if (name == "none") return AugMode::None;
    if (name == "fact") return AugMode::Fact;
    if (name == "reasoning") return AugMode::Reasoning;
    if (name == "both") return AugMode::Both;
    fail_config("unknown augmentation mode: " + name);
}

const char* aug_mode_name(AugMode m) {
    switch (m) {
    case AugMode::None: return "none";
    case AugMode::Fact: return "fact";
    case AugMode::Reasoning: return "reasoning";
    case AugMode::Both: return "both";
    }
    return "?";
}

void BackboneConfig::validate() const {
    if (embedding_dim < 1) fail_config("embedding_dim must be positive");
    if (aug_dim < 1) fail_config("aug_dim must be positive");
    if (cross_layers < 1) fail_config("cross_layers must be positive");
    for (int s : mlp_sizes)
        if (s < 1) fail_config("mlp sizes must be positive");
    for (int s : attention_sizes)
        if (s < 1) fail_config("attention sizes must be positive");
}

ModelMeta ModelMeta::from(const data::SampleSet& set) {
    ModelMeta m;
    m.vocab_sizes = set.vocab_sizes;
    m.rating_vocab_size = set.rating_vocab_size;
    m.max_history = set.max_history;
    return m;
}

Batch make_batch(const data::SampleSet& set, const std::vector<data::Sample>& samples,
                 std::span<const std::size_t> idx) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    const int h = set.max_history;
    for (int f = 0; f < data::kNumFields; ++f) b.fields[f].resize(idx.size());
    b.hist_movie.assign(h, std::vector<std::int32_t>(idx.size(), 0));
    b.hist_cat.assign(h, std::vector<std::int32_t>(idx.size(), 0));
    b.hist_rating.assign(h, std::vector<std::int32_t>(idx.size(), 0));
    b.hist_mean_w = Mat::Zero(n, h);
    b.att_mask_add = Mat::Constant(n, h, -1e30);
    b.has_hist = Mat::Zero(n, 1);
    b.labels.resize(idx.size());
    b.user_ref.resize(idx.size());
    b.item_ref.resize(idx.size());

    for (std::size_t r = 0; r < idx.size(); ++r) {
        const data::Sample& s = samples[idx[r]];
        for (int f = 0; f < data::kNumFields; ++f) b.fields[f][r] = s.fields[f];
        b.labels[r] = static_cast<double>(s.label);
        b.user_ref[r] = s.user_ref;
        b.item_ref[r] = s.item_ref;
        if (s.history.size() > static_cast<std::size_t>(h))
            fail_data("sample history exceeds max_history");
        const auto len = s.history.size();
        if (len > 0) b.has_hist(static_cast<Eigen::Index>(r), 0) = 1.0;
        for (std::size_t j = 0; j < len; ++j) {
            b.hist_movie[j][r] = s.history[j].movie;
            b.hist_cat[j][r] = s.history[j].category;
            b.hist_rating[j][r] = s.history[j].rating;
            b.hist_mean_w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                1.0 / static_cast<double>(len);
            b.att_mask_add(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = 0.0;
        }
    }
    return b;
}

Tensor fm_second_order(const std::vector<Tensor>& field_embeddings) {
    if (field_embeddings.size() < 2)
        fail_numeric("fm_second_order needs at least 2 fields, got " +
                     std::to_string(field_embeddings.size()));
    Tensor sum = field_embeddings[0];
    Tensor sum_sq = nn::mul(field_embeddings[0], field_embeddings[0]);
    for (std::size_t f = 1; f < field_embeddings.size(); ++f) {
        sum = nn::add(sum, field_embeddings[f]);
        sum_sq = nn::add(sum_sq, nn::mul(field_embeddings[f], field_embeddings[f]));
    }
    return nn::scale(nn::row_sum(nn::sub(nn::mul(sum, sum), sum_sq)), 0.5);
}

Tensor cross_layer(Tensor x0, Tensor x_l, Tensor w, Tensor b) {
    return nn::add(nn::mul(x0, nn::affine(x_l, w, b)), x_l);
}

Tensor din_attention(Graph& g, Tensor target, const std::vector<Tensor>& history,
                     const nn::Mat& att_mask_add, const nn::Mat& has_hist,
                     const AttentionParams& att) {
    if (history.empty())
        return g.input(Mat::Zero(target.rows(), target.cols()));

    std::vector<Tensor> scores;
    scores.reserve(history.size());
    for (const Tensor& h : history) {
        Tensor feat = nn::concat({h, target, nn::sub(h, target), nn::mul(h, target)}, 1);
        Tensor s = feat;
        for (std::size_t l = 0; l < att.ws.size(); ++l) {
            s = nn::affine(s, g.param(*att.ws[l]), g.param(*att.bs[l]));
            if (l + 1 < att.ws.size()) s = nn::relu(s);
        }
        scores.push_back(s);  // (B,1)
    }
    Tensor weights = nn::softmax(nn::add(nn::concat(scores, 1), g.input(att_mask_add)), 1);
    Tensor pooled;
    for (std::size_t j = 0; j < history.size(); ++j) {
        Tensor term = nn::scale_rows(history[j],
                                     nn::slice_cols(weights, static_cast<Eigen::Index>(j), 1));
        pooled = pooled.valid() ? nn::add(pooled, term) : term;
    }
    // Rows with no history softmax over the uniform -1e30 tail; zero them.
    return nn::scale_rows(pooled, g.input(has_hist));
}

Backbone::Backbone(const BackboneConfig& cfg, const ModelMeta& meta,
                   nn::ParameterStore& params, Rng& rng, std::string prefix)
    : cfg_(cfg), meta_(meta), prefix_(std::move(prefix)) {
    cfg_.validate();
    const int d = cfg_.embedding_dim;
    for (int f = 0; f < data::kNumFields; ++f)
        emb_[f] = &params.create(prefix_ + ".emb." + data::kFieldNames[f],
                                 nn::xavier_uniform(rng, meta_.vocab_sizes[f], d));
    emb_rating_ = &params.create(prefix_ + ".emb.rating",
                                 nn::xavier_uniform(rng, meta_.rating_vocab_size, d));
    if (cfg_.aug_dim != d) {
        if (mode_uses_user(cfg_.mode)) {
            bridge_user_w_ = &params.create(prefix_ + ".aug_bridge.user.w",
                                            nn::xavier_uniform(rng, cfg_.aug_dim, d));
            bridge_user_b_ = &params.create(prefix_ + ".aug_bridge.user.b", Mat::Zero(1, d));
        }
        if (mode_uses_item(cfg_.mode)) {
            bridge_item_w_ = &params.create(prefix_ + ".aug_bridge.item.w",
                                            nn::xavier_uniform(rng, cfg_.aug_dim, d));
            bridge_item_b_ = &params.create(prefix_ + ".aug_bridge.item.b", Mat::Zero(1, d));
        }
    }
}

int Backbone::interaction_field_count() const {
    int n = data::kNumFields + 1;  // categorical fields + pooled history
    if (mode_uses_user(cfg_.mode)) ++n;
    if (mode_uses_item(cfg_.mode)) ++n;
    return n;
}

Backbone::MlpParams Backbone::make_mlp(nn::ParameterStore& params, Rng& rng,
                                       const std::string& name, int in_dim,
                                       const std::vector<int>& hidden, int out_dim) {
    MlpParams mlp;
    int in = in_dim;
    std::vector<int> sizes = hidden;
    sizes.push_back(out_dim);
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        mlp.ws.push_back(&params.create(name + ".w" + std::to_string(l),
                                        nn::xavier_uniform(rng, in, sizes[l])));
        mlp.bs.push_back(&params.create(name + ".b" + std::to_string(l),
                                        Mat::Zero(1, sizes[l])));
        in = sizes[l];
    }
    return mlp;
}

Tensor Backbone::run_mlp(Graph& g, const MlpParams& mlp, Tensor x) {
    Tensor h = x;
    for (std::size_t l = 0; l < mlp.ws.size(); ++l) {
        h = nn::affine(h, g.param(*mlp.ws[l]), g.param(*mlp.bs[l]));
        if (l + 1 < mlp.ws.size()) h = nn::relu(h);
    }
    return h;
}

Tensor Backbone::mean_pooled_history(Graph& g, const Batch& b, const Inputs& in) const {
    if (in.history.empty())
        return g.input(Mat::Zero(b.rows(), cfg_.embedding_dim));
    Tensor pooled;
    for (std::size_t j = 0; j < in.history.size(); ++j) {
        Tensor w = g.input(b.hist_mean_w.col(static_cast<Eigen::Index>(j)));
        Tensor term = nn::scale_rows(in.history[j], w);
        pooled = pooled.valid() ? nn::add(pooled, term) : term;
    }
    return pooled;
}

Tensor Backbone::forward(Graph& g, const Batch& b, Tensor aug_user, Tensor aug_item) {
    const bool want_user = mode_uses_user(cfg_.mode);
    const bool want_item = mode_uses_item(cfg_.mode);
    if (want_user && !aug_user.valid())
        fail_data("mode '" + std::string(aug_mode_name(cfg_.mode)) +
                  "' requires a reasoning augmented vector");
    if (want_item && !aug_item.valid())
        fail_data("mode '" + std::string(aug_mode_name(cfg_.mode)) +
                  "' requires a fact augmented vector");

    Inputs in;
    std::array<Tensor, data::kNumFields> tables;
    for (int f = 0; f < data::kNumFields; ++f) tables[f] = g.param(*emb_[f]);
    for (int f = 0; f < data::kNumFields; ++f)
        in.field_embs.push_back(nn::embedding_lookup(tables[f], b.fields[f]));

    Tensor rating_table;
    if (!b.hist_movie.empty()) rating_table = g.param(*emb_rating_);
    for (std::size_t j = 0; j < b.hist_movie.size(); ++j) {
        Tensor item = nn::embedding_lookup(tables[data::kMovieId], b.hist_movie[j]);
        Tensor cat = nn::embedding_lookup(tables[data::kCategory], b.hist_cat[j]);
        Tensor rating = nn::embedding_lookup(rating_table, b.hist_rating[j]);
        in.history.push_back(nn::add(nn::add(item, cat), rating));
    }

    auto bridge = [&](Tensor aug, nn::Parameter* w, nn::Parameter* bias) {
        if (static_cast<int>(aug.cols()) != cfg_.aug_dim)
            fail_data("augmented vector dim " + std::to_string(aug.cols()) +
                      " does not match configured aug_dim " + std::to_string(cfg_.aug_dim));
        if (cfg_.aug_dim == cfg_.embedding_dim) return aug;
        return nn::affine(aug, g.param(*w), g.param(*bias));
    };
    if (want_user) in.augmented.push_back(bridge(aug_user, bridge_user_w_, bridge_user_b_));
    if (want_item) in.augmented.push_back(bridge(aug_item, bridge_item_w_, bridge_item_b_));

    return nn::sigmoid(logits(g, b, in));
}

DeepFmModel::DeepFmModel(const BackboneConfig& cfg, const ModelMeta& meta,
                         nn::ParameterStore& params, Rng& rng, const std::string& prefix)
    : Backbone(cfg, meta, params, rng, prefix) {
    for (int f = 0; f < data::kNumFields; ++f)
        first_order_[f] = &params.create(prefix + ".fo." + data::kFieldNames[f],
                                         nn::xavier_uniform(rng, meta.vocab_sizes[f], 1));
    bias_ = &params.create(prefix + ".fo.bias", Mat::Zero(1, 1));
    const int fields = interaction_field_count();
    mlp_ = make_mlp(params, rng, prefix + ".mlp", fields * cfg_.embedding_dim,
                    cfg_.mlp_sizes, 1);
}

Tensor DeepFmModel::logits(Graph& g, const Batch& b, const Inputs& in) {
    std::vector<Tensor> fields = in.field_embs;
    fields.push_back(mean_pooled_history(g, b, in));
    for (const Tensor& a : in.augmented) fields.push_back(a);

    Tensor fo;
    for (int f = 0; f < data::kNumFields; ++f) {
        Tensor t = nn::embedding_lookup(g.param(*first_order_[f]), b.fields[f]);
        fo = fo.valid() ? nn::add(fo, t) : t;
    }
    fo = nn::add(fo, g.param(*bias_));

    Tensor fm2 = fm_second_order(fields);
    Tensor deep = run_mlp(g, mlp_, nn::concat(fields, 1));
    return nn::add(nn::add(fo, fm2), deep);
}

DcnV2Model::DcnV2Model(const BackboneConfig& cfg, const ModelMeta& meta,
                       nn::ParameterStore& params, Rng& rng, const std::string& prefix)
    : Backbone(cfg, meta, params, rng, prefix) {
    const int dim = interaction_field_count() * cfg_.embedding_dim;
    for (int l = 0; l < cfg_.cross_layers; ++l) {
        cross_w_.push_back(&params.create(prefix + ".cross." + std::to_string(l) + ".w",
                                          nn::xavier_uniform(rng, dim, dim)));
        cross_b_.push_back(&params.create(prefix + ".cross." + std::to_string(l) + ".b",
                                          Mat::Zero(1, dim)));
    }
    mlp_ = make_mlp(params, rng, prefix + ".mlp", dim, cfg_.mlp_sizes, 1);
}

Tensor DcnV2Model::logits(Graph& g, const Batch& b, const Inputs& in) {
    std::vector<Tensor> fields = in.field_embs;
    fields.push_back(mean_pooled_history(g, b, in));
    for (const Tensor& a : in.augmented) fields.push_back(a);

    Tensor x0 = nn::concat(fields, 1);
    Tensor x = x0;
    for (std::size_t l = 0; l < cross_w_.size(); ++l)
        x = cross_layer(x0, x, g.param(*cross_w_[l]), g.param(*cross_b_[l]));
    return run_mlp(g, mlp_, x);
}

DinModel::DinModel(const BackboneConfig& cfg, const ModelMeta& meta,
                   nn::ParameterStore& params, Rng& rng, const std::string& prefix)
    : Backbone(cfg, meta, params, rng, prefix) {
    const int d = cfg_.embedding_dim;
    int in = 4 * d;
    std::vector<int> sizes = cfg_.attention_sizes;
    sizes.push_back(1);
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        att_.ws.push_back(&params.create(prefix + ".att.w" + std::to_string(l),
                                         nn::xavier_uniform(rng, in, sizes[l])));
        att_.bs.push_back(&params.create(prefix + ".att.b" + std::to_string(l),
                                         Mat::Zero(1, sizes[l])));
        in = sizes[l];
    }
    const int fields = interaction_field_count();
    mlp_ = make_mlp(params, rng, prefix + ".mlp", fields * d, cfg_.mlp_sizes, 1);
}

Tensor DinModel::logits(Graph& g, const Batch& b, const Inputs& in) {
    Tensor target = nn::add(in.field_embs[data::kMovieId], in.field_embs[data::kCategory]);
    Tensor pooled = din_attention(g, target, in.history, b.att_mask_add, b.has_hist, att_);

    std::vector<Tensor> fields = in.field_embs;
    fields.push_back(pooled);
    for (const Tensor& a : in.augmented) fields.push_back(a);
    return run_mlp(g, mlp_, nn::concat(fields, 1));
}

std::unique_ptr<Backbone> make_backbone(const BackboneConfig& cfg, const ModelMeta& meta,
                                        nn::ParameterStore& params, Rng& rng,
                                        const std::string& prefix) {
    switch (cfg.kind) {
    case BackboneKind::DeepFm:
        return std::make_unique<DeepFmModel>(cfg, meta, params, rng, prefix);
    case BackboneKind::DcnV2:
        return std::make_unique<DcnV2Model>(cfg, meta, params, rng, prefix);
    case BackboneKind::Din:
        return std::make_unique<DinModel>(cfg, meta, params, rng, prefix);
    }
    fail_config("unknown backbone kind");
}

}  // namespace kar
