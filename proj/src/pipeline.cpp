#include "kar/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kar/error.hpp"
#include "kar/metrics.hpp"
#include "kar/optim.hpp"
#include "kar/rng.hpp"

namespace kar {

using nn::Graph;
using nn::Mat;
using nn::Tensor;

std::string format_final_metrics(const MetricsReport& r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "auc=%.6f logloss=%.6f", r.auc, r.logloss);
    return buf;
}

KarModel::KarModel(const RunConfig& cfg, const ModelMeta& meta, int rep_dim)
    : mode_(cfg.aug_mode()), prestored_(cfg.use_prestored) {
    Rng backbone_rng(derive_seed(cfg.seed, "backbone"));
    backbone_ = make_backbone(cfg.backbone_config(), meta, params_, backbone_rng);
    if (mode_ != AugMode::None && !prestored_) {
        Rng adaptor_rng(derive_seed(cfg.seed, "adaptor"));
        adaptor_ = std::make_unique<Adaptor>(cfg.adaptor_config(rep_dim), params_,
                                             adaptor_rng);
    }
}

Tensor KarModel::forward(Graph& g, const Batch& b) const {
    Tensor aug_user, aug_item;
    if (mode_uses_user(mode_)) {
        if (prestored_) {
            if (b.aug_user.rows() != b.rows())
                fail_data("batch is missing prestored reasoning augmented vectors");
            aug_user = g.input(b.aug_user);
        } else {
            if (b.rep_user.rows() != b.rows())
                fail_data("batch is missing preference knowledge representations");
            aug_user = adaptor_->forward_user(g, g.input(b.rep_user));
        }
    }
    if (mode_uses_item(mode_)) {
        if (prestored_) {
            if (b.aug_item.rows() != b.rows())
                fail_data("batch is missing prestored fact augmented vectors");
            aug_item = g.input(b.aug_item);
        } else {
            if (b.rep_item.rows() != b.rows())
                fail_data("batch is missing item knowledge representations");
            aug_item = adaptor_->forward_item(g, g.input(b.rep_item));
        }
    }
    return backbone_->forward(g, b, aug_user, aug_item);
}

KnowledgeInputs::KnowledgeInputs(const RunConfig& cfg, const data::SampleSet& set)
    : mode_(cfg.aug_mode()), prestored_(cfg.use_prestored) {
    if (mode_ == AugMode::None) return;

    const std::string& path = prestored_ ? cfg.aug_cache_path : cfg.rep_cache_path;
    if (path.empty())
        fail_config(std::string("mode '") + aug_mode_name(mode_) + "' needs " +
                    (prestored_ ? "aug_cache" : "rep_cache") + " to be set");
    VectorCache cache = VectorCache::load(path);
    rep_dim_ = static_cast<int>(cache.dim());
    if (prestored_ && rep_dim_ != cfg.aug_dim)
        fail_data("augmented cache " + path + " has dim " + std::to_string(rep_dim_) +
                  ", expected aug_dim " + std::to_string(cfg.aug_dim));

    auto gather = [&](const std::vector<std::string>& ids, Kind kind) {
        Mat rows(static_cast<Eigen::Index>(ids.size()), rep_dim_);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!cache.contains(ids[i], kind))
                fail_data("cache " + path + " has no entry for entity '" + ids[i] +
                          "' (" + kind_name(kind) + ")");
            rows.row(static_cast<Eigen::Index>(i)) =
                cache.find(ids[i], kind).cast<double>().transpose();
        }
        return rows;
    };
    if (mode_uses_user(mode_)) user_rows_ = gather(set.user_ids, Kind::Preference);
    if (mode_uses_item(mode_)) item_rows_ = gather(set.item_ids, Kind::ItemFactual);
}

void KnowledgeInputs::fill(Batch& b) const {
    if (mode_ == AugMode::None) return;
    const auto n = b.rows();
    auto gather_rows = [&](const Mat& src, const std::vector<std::int32_t>& refs) {
        Mat out(n, src.cols());
        for (Eigen::Index i = 0; i < n; ++i)
            out.row(i) = src.row(refs[static_cast<std::size_t>(i)]);
        return out;
    };
    if (mode_uses_user(mode_)) {
        Mat rows = gather_rows(user_rows_, b.user_ref);
        (prestored_ ? b.aug_user : b.rep_user) = std::move(rows);
    }
    if (mode_uses_item(mode_)) {
        Mat rows = gather_rows(item_rows_, b.item_ref);
        (prestored_ ? b.aug_item : b.rep_item) = std::move(rows);
    }
}

std::uint64_t test_identity_hash(const data::SampleSet& set) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& s : set.test) {
        h = fnv1a64(set.user_ids[static_cast<std::size_t>(s.user_ref)], h);
        h = fnv1a64(set.item_ids[static_cast<std::size_t>(s.item_ref)], h);
        h = fnv1a64(std::to_string(s.label), h);
    }
    return h;
}

namespace {

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, int batch_size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        out.push_back(std::move(idx));
    }
    return out;
}

struct EvalResult {
    double auc = 0.0;
    double logloss = 0.0;
};

EvalResult evaluate(const KarModel& model, const data::SampleSet& set,
                    const KnowledgeInputs& inputs, int batch_size) {
    if (set.test.empty()) fail_data("evaluation needs a non-empty test split");
    std::vector<double> preds, labels;
    preds.reserve(set.test.size());
    labels.reserve(set.test.size());
    for (const auto& idx : batch_indices(set.test.size(), batch_size)) {
        Batch b = make_batch(set, set.test, idx);
        inputs.fill(b);
        Graph g;
        Tensor p = model.forward(g, b);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            preds.push_back(p.value()(i, 0));
            labels.push_back(b.labels[static_cast<std::size_t>(i)]);
        }
    }
    return {auc(preds, labels), logloss(preds, labels)};
}

void write_report_jsonl(const std::string& path, const RunConfig& cfg,
                        const TrainArtifacts& art) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail_data("cannot write report: " + path);
    for (const EpochStats& e : art.report.epochs) {
        nlohmann::json j = {
            {"event", "epoch"},        {"epoch", e.epoch},
            {"train_logloss", e.train_logloss},
            {"first_batches_logloss", e.first_batches_logloss},
            {"last_batches_logloss", e.last_batches_logloss},
            {"test_auc", e.test_auc},  {"test_logloss", e.test_logloss},
            {"seconds", e.seconds},
        };
        os << j.dump() << "\n";
    }
    nlohmann::json j = {
        {"event", "final"},
        {"backbone", cfg.backbone},
        {"mode", cfg.mode},
        {"seed", cfg.seed},
        {"auc", art.report.auc},
        {"logloss", art.report.logloss},
        {"train_seconds", art.report.train_seconds},
        {"test_hash", art.test_hash},
    };
    os << j.dump() << "\n";
}

void write_manifest(const RunConfig& cfg, int rep_dim) {
    nlohmann::json j = {
        {"backbone", cfg.backbone},
        {"mode", cfg.mode},
        {"embedding_dim", cfg.embedding_dim},
        {"aug_dim", cfg.aug_dim},
        {"rep_dim", rep_dim},
        {"adaptor",
         {{"variant", cfg.adaptor_variant},
          {"shared_experts", cfg.shared_experts},
          {"preference_experts", cfg.preference_experts},
          {"item_experts", cfg.item_experts}}},
        {"checkpoint", cfg.checkpoint_path},
    };
    std::ofstream os(cfg.checkpoint_path + ".manifest.json", std::ios::trunc);
    if (!os) fail_data("cannot write manifest for " + cfg.checkpoint_path);
    os << j.dump(2) << "\n";
}

void stamp_meta(nn::Checkpoint& ckpt, const RunConfig& cfg, int rep_dim) {
    ckpt.set_meta("backbone", cfg.backbone);
    ckpt.set_meta("mode", cfg.mode);
    ckpt.set_meta("embedding_dim", std::to_string(cfg.embedding_dim));
    ckpt.set_meta("aug_dim", std::to_string(cfg.aug_dim));
    ckpt.set_meta("rep_dim", std::to_string(rep_dim));
    ckpt.set_meta("adaptor_variant", cfg.adaptor_variant);
    ckpt.set_meta("seed", std::to_string(cfg.seed));
}

}  // namespace

TrainArtifacts train(const RunConfig& cfg) {
    data::SampleSet set = data::SampleSet::load(cfg.samples_path);
    if (cfg.slice > 0 && static_cast<std::int64_t>(set.train.size()) > cfg.slice)
        set.train.resize(static_cast<std::size_t>(cfg.slice));
    if (set.train.empty()) fail_data("training split is empty: " + cfg.samples_path);

    KnowledgeInputs inputs(cfg, set);
    const int rep_dim = inputs.rep_dim() > 0 ? inputs.rep_dim() : cfg.encoder_dim;
    KarModel model(cfg, ModelMeta::from(set), rep_dim);
    nn::Adam adam(model.params(), {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps});

    TrainArtifacts art;
    art.test_hash = test_identity_hash(set);
    nn::Checkpoint last_good = nn::snapshot(model.params(), &adam);
    stamp_meta(last_good, cfg, rep_dim);

    const auto t_start = std::chrono::steady_clock::now();
    double best_auc = -1.0;
    int patience_left = cfg.patience;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto e_start = std::chrono::steady_clock::now();
        std::vector<std::size_t> order(set.train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);

        std::vector<double> batch_losses;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            Batch b = make_batch(set, set.train, idx);
            inputs.fill(b);

            Graph g;
            Tensor preds = model.forward(g, b);
            Tensor loss = nn::bce_loss(preds, b.labels);
            const double loss_val = loss.value()(0, 0);
            if (!std::isfinite(loss_val)) {
                std::string where = "epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_losses.size());
                if (!cfg.checkpoint_path.empty()) {
                    last_good.save(cfg.checkpoint_path);
                    where += "; last good checkpoint written to " + cfg.checkpoint_path;
                }
                fail_numeric("non-finite training loss at " + where);
            }
            batch_losses.push_back(loss_val);
            g.backward(loss);
            adam.step();
            model.params().zero_grad();
        }

        EvalResult ev = evaluate(model, set, inputs, cfg.batch_size);
        const std::size_t k = std::min<std::size_t>(10, batch_losses.size());
        EpochStats st;
        st.epoch = epoch;
        st.train_logloss = std::accumulate(batch_losses.begin(), batch_losses.end(), 0.0) /
                           static_cast<double>(batch_losses.size());
        st.first_batches_logloss =
            std::accumulate(batch_losses.begin(), batch_losses.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
            static_cast<double>(k);
        st.last_batches_logloss =
            std::accumulate(batch_losses.end() - static_cast<std::ptrdiff_t>(k), batch_losses.end(), 0.0) /
            static_cast<double>(k);
        st.test_auc = ev.auc;
        st.test_logloss = ev.logloss;
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - e_start).count();
        art.report.epochs.push_back(st);
        art.report.auc = ev.auc;
        art.report.logloss = ev.logloss;

        last_good = nn::snapshot(model.params(), &adam);
        stamp_meta(last_good, cfg, rep_dim);

        if (ev.auc > best_auc + 1e-9) {
            best_auc = ev.auc;
            patience_left = cfg.patience;
        } else if (--patience_left < 0) {
            break;
        }
    }
    art.report.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!cfg.checkpoint_path.empty()) {
        last_good.save(cfg.checkpoint_path);
        write_manifest(cfg, rep_dim);
    }
    if (!cfg.report_path.empty()) write_report_jsonl(cfg.report_path, cfg, art);
    return art;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::vector<AugMode>& modes) {
    std::vector<AblationRow> rows;
    for (AugMode m : modes) {
        RunConfig run = cfg;
        run.mode = aug_mode_name(m);
        if (!run.checkpoint_path.empty()) run.checkpoint_path += std::string(".") + run.mode;
        if (!run.report_path.empty()) run.report_path += std::string(".") + run.mode;
        TrainArtifacts art = train(run);
        rows.push_back({run.mode, art.report, art.test_hash});
    }
    for (const auto& r : rows)
        if (r.test_hash != rows.front().test_hash)
            fail_data("ablation runs saw different test splits");
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "mode        auc        logloss\n";
    for (const auto& r : rows) {
        char line[80];
        std::snprintf(line, sizeof(line), "%-10s  %.6f   %.6f\n", r.mode.c_str(),
                      r.report.auc, r.report.logloss);
        os << line;
    }
    return os.str();
}

std::vector<BenchRow> bench_inference(const RunConfig& cfg) {
    if (cfg.aug_mode() == AugMode::None)
        fail_config("bench requires mode != none (got 'none')");
    if (cfg.base_checkpoint_path.empty() || cfg.checkpoint_path.empty())
        fail_config("bench requires both checkpoint and base_checkpoint");

    data::SampleSet set = data::SampleSet::load(cfg.samples_path);
    if (set.test.empty()) fail_data("bench needs a non-empty test split");

    RunConfig base_cfg = cfg;
    base_cfg.mode = "none";
    base_cfg.use_prestored = false;
    RunConfig kar_cfg = cfg;
    kar_cfg.use_prestored = false;
    RunConfig pre_cfg = cfg;
    pre_cfg.use_prestored = true;

    KnowledgeInputs rep_inputs(kar_cfg, set);
    KnowledgeInputs aug_inputs(pre_cfg, set);

    const ModelMeta meta = ModelMeta::from(set);
    KarModel base_model(base_cfg, meta, cfg.encoder_dim);
    KarModel kar_model(kar_cfg, meta, rep_inputs.rep_dim());
    KarModel pre_model(pre_cfg, meta, rep_inputs.rep_dim());

    nn::restore(nn::Checkpoint::load(cfg.base_checkpoint_path), base_model.params());
    const nn::Checkpoint kar_ckpt = nn::Checkpoint::load(cfg.checkpoint_path);
    nn::restore(kar_ckpt, kar_model.params());
    nn::restore(kar_ckpt, pre_model.params());

    // Pre-resolve every batch: the timed region covers the forward pass only.
    const int n_batches = std::max(1, cfg.bench_batches);
    const int warmup = std::max(0, cfg.bench_warmup);
    std::vector<Batch> batches;
    std::size_t cursor = 0;
    for (int k = 0; k < n_batches + warmup; ++k) {
        std::vector<std::size_t> idx;
        idx.reserve(static_cast<std::size_t>(cfg.batch_size));
        for (int i = 0; i < cfg.batch_size; ++i) {
            idx.push_back(cursor);
            cursor = (cursor + 1) % set.test.size();
        }
        Batch b = make_batch(set, set.test, idx);
        rep_inputs.fill(b);
        aug_inputs.fill(b);
        batches.push_back(std::move(b));
    }

    auto time_variant = [&](const KarModel& model, const char* name) {
        volatile double sink = 0.0;
        for (int k = 0; k < warmup; ++k) {
            Graph g;
            sink += model.forward(g, batches[static_cast<std::size_t>(k)]).value()(0, 0);
        }
        std::vector<double> secs;
        secs.reserve(static_cast<std::size_t>(n_batches));
        for (int k = 0; k < n_batches; ++k) {
            const Batch& b = batches[static_cast<std::size_t>(warmup + k)];
            const auto t0 = std::chrono::steady_clock::now();
            Graph g;
            Tensor p = model.forward(g, b);
            sink += p.value()(0, 0);
            secs.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        const double mean = std::accumulate(secs.begin(), secs.end(), 0.0) /
                            static_cast<double>(secs.size());
        double var = 0.0;
        for (double s : secs) var += (s - mean) * (s - mean);
        var /= std::max<std::size_t>(1, secs.size() - 1);
        (void)sink;
        return BenchRow{name, mean, std::sqrt(var), n_batches};
    };

    std::vector<BenchRow> rows;
    rows.push_back(time_variant(base_model, "base"));
    rows.push_back(time_variant(pre_model, "kar_prestored"));
    rows.push_back(time_variant(kar_model, "kar_with_adaptor"));
    return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "variant            mean_s        std_s      batches\n";
    double base_mean = 0.0;
    for (const auto& r : rows)
        if (r.variant == "base") base_mean = r.mean_s;
    for (const auto& r : rows) {
        char line[120];
        std::snprintf(line, sizeof(line), "%-17s  %.6e  %.6e  %5d", r.variant.c_str(),
                      r.mean_s, r.std_s, r.batches);
        os << line;
        if (base_mean > 0.0) {
            std::snprintf(line, sizeof(line), "   (%.3fx base)", r.mean_s / base_mean);
            os << line;
        }
        os << "\n";
    }
    return os.str();
}

void export_augmented(const RunConfig& cfg) {
    if (cfg.rep_cache_path.empty() || cfg.aug_cache_path.empty())
        fail_config("export-augmented needs rep_cache and aug_cache paths");
    if (cfg.checkpoint_path.empty()) fail_config("export-augmented needs a checkpoint");

    VectorCache reps = VectorCache::load(cfg.rep_cache_path);
    data::SampleSet set = data::SampleSet::load(cfg.samples_path);

    RunConfig model_cfg = cfg;
    model_cfg.mode = "both";
    model_cfg.use_prestored = false;
    KarModel model(model_cfg, ModelMeta::from(set), static_cast<int>(reps.dim()));
    nn::restore(nn::Checkpoint::load(cfg.checkpoint_path), model.params());

    std::vector<const VectorRecord*> users, items;
    for (const auto& r : reps.records())
        (r.kind == Kind::Preference ? users : items).push_back(&r);

    std::vector<VectorRecord> out;
    out.reserve(reps.size());
    auto run_side = [&](const std::vector<const VectorRecord*>& recs, bool user_side) {
        if (recs.empty()) return;
        Mat in(static_cast<Eigen::Index>(recs.size()), reps.dim());
        for (std::size_t i = 0; i < recs.size(); ++i)
            in.row(static_cast<Eigen::Index>(i)) = recs[i]->values.cast<double>().transpose();
        Graph g;
        Tensor rep = g.input(std::move(in));
        Tensor aug = user_side ? model.adaptor()->forward_user(g, rep)
                               : model.adaptor()->forward_item(g, rep);
        const Mat& v = aug.value();
        for (std::size_t i = 0; i < recs.size(); ++i) {
            VectorRecord rec;
            rec.key = recs[i]->key;
            rec.kind = recs[i]->kind;
            rec.values = v.row(static_cast<Eigen::Index>(i)).cast<float>().transpose();
            out.push_back(std::move(rec));
        }
    };
    run_side(users, true);
    run_side(items, false);
    VectorCache::write(cfg.aug_cache_path, out, cfg.aug_dim);
}

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& cfg,
                                           const ScenarioFactors& factors) {
    if (cfg.llm == "live") return std::make_unique<HttpLlmClient>(cfg.llm_config());
    if (cfg.llm == "stub")
        return std::make_unique<StubLlmClient>(factors.names, cfg.seed);
    fail_config("unknown llm client kind: " + cfg.llm);
}

std::vector<PromptRequest> build_all_prompts(const data::MovieLensRaw& raw,
                                             const data::SampleSet& set,
                                             const ScenarioFactors& factors,
                                             int max_history) {
    struct Indexed {
        const data::RawInteraction* r;
        std::size_t order;
    };
    std::map<std::string, std::vector<Indexed>> by_user;
    for (std::size_t i = 0; i < raw.interactions.size(); ++i)
        by_user[raw.interactions[i].user_id].push_back({&raw.interactions[i], i});
    for (auto& [_, v] : by_user)
        std::sort(v.begin(), v.end(), [](const Indexed& a, const Indexed& b) {
            if (a.r->timestamp != b.r->timestamp) return a.r->timestamp < b.r->timestamp;
            return a.order < b.order;
        });

    std::vector<PromptRequest> prompts;
    prompts.reserve(set.user_ids.size() + set.item_ids.size());
    for (const auto& uid : set.user_ids) {
        std::vector<HistoryLine> history;
        auto it = by_user.find(uid);
        if (it != by_user.end()) {
            const auto& seq = it->second;
            const std::size_t take =
                std::min<std::size_t>(seq.size(), static_cast<std::size_t>(max_history));
            for (std::size_t j = seq.size() - take; j < seq.size(); ++j) {
                const data::MovieInfo m = raw.movie_or_placeholder(seq[j].r->item_id);
                history.push_back({m.title, m.genres, seq[j].r->rating});
            }
        }
        prompts.push_back(build_preference_prompt(
            uid, data::profile_strings(raw.user(uid)), history, factors));
    }
    for (const auto& iid : set.item_ids) {
        const data::MovieInfo m = raw.movie_or_placeholder(iid);
        prompts.push_back(
            build_item_prompt(iid, {m.title, "category: " + m.genres}, factors));
    }
    return prompts;
}

void save_prompts(const std::string& path, const std::vector<PromptRequest>& prompts) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail_data("cannot write prompts: " + path);
    for (const auto& p : prompts) {
        nlohmann::json j = {
            {"entity_id", p.entity_id}, {"kind", kind_name(p.kind)}, {"text", p.text}};
        os << j.dump() << "\n";
    }
}

std::vector<PromptRequest> load_prompts(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_data("cannot open prompts: " + path);
    std::vector<PromptRequest> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            PromptRequest p;
            p.entity_id = j.at("entity_id").get<std::string>();
            p.kind = parse_kind(j.at("kind").get<std::string>());
            p.text = j.at("text").get<std::string>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            fail_data(path + ":" + std::to_string(line_no) + ": malformed prompt: " + e.what());
        }
    }
    return out;
}

std::size_t generate_all(const std::vector<PromptRequest>& prompts, LlmClient& llm,
                         const RetryPolicy& policy, KnowledgeStore& store, int workers) {
    if (workers < 1) fail_config("workers must be >= 1");
    const std::size_t before = store.size();
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mu;

    auto work = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= prompts.size()) return;
            try {
                generate_knowledge(prompts[i], llm, policy, store);
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mu);
                if (!failed.exchange(true)) first_error = e.what();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(std::max<std::size_t>(1, prompts.size())));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failed.load()) fail_data("knowledge generation failed: " + first_error);
    return store.size() - before;
}

std::vector<VectorRecord> encode_store(const KnowledgeStore& store,
                                       const TokenEncoder& encoder, Aggregation agg) {
    std::vector<VectorRecord> out;
    for (const KnowledgeRecord& r : store.all()) {
        Eigen::MatrixXd tokens = encoder.encode(r.entity_id, r.kind, r.text);
        Eigen::VectorXd rep = aggregate(tokens, agg);
        VectorRecord rec;
        rec.key = r.entity_id;
        rec.kind = r.kind;
        rec.values = rep.cast<float>();
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace kar
