#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "kar/error.hpp"
#include "kar/metrics.hpp"
#include "kar/pipeline.hpp"
#include "kar/rng.hpp"
#include "support/fixtures.hpp"

using namespace kar;

namespace {

double pairwise_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    // O(n^2) oracle over positive-negative pairs, half credit for ties.
    std::uint64_t num2 = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1.0) {
            ++pos;
            for (std::size_t j = 0; j < scores.size(); ++j) {
                if (labels[j] == 1.0) continue;
                if (scores[i] > scores[j]) num2 += 2;
                else if (scores[i] == scores[j]) num2 += 1;
            }
        } else {
            ++neg;
        }
    }
    return static_cast<double>(num2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

testing::Workspace small_workspace(const char* name, std::uint64_t seed = 7) {
    TopicDatasetConfig tc;
    tc.n_users = 60;
    tc.n_items = 40;
    tc.n_topics = 4;
    tc.per_user = 10;
    tc.seed = seed;
    return testing::make_topic_workspace(name, tc, 0, 24);
}

}  // namespace

TEST_CASE("auc") {
    SUBCASE("all concordant pairs give 1.0") {
        const std::vector<double> s{0.9, 0.2, 0.4}, y{1, 0, 1};
        CHECK(auc(s, y) == 1.0);
    }
    SUBCASE("full tie gives half credit") {
        const std::vector<double> s{0.5, 0.5}, y{1, 0};
        CHECK(auc(s, y) == 0.5);
    }
    SUBCASE("single-class input is an undefined-metric error") {
        const std::vector<double> s{0.5, 0.6}, y{1, 1};
        CHECK_THROWS_AS(auc(s, y), Error);
    }
    SUBCASE("rank-sum equals the pairwise oracle exactly, ties included") {
        Rng rng(606);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = static_cast<int>(rng.uniform_int(5, 200));
            std::vector<double> s, y;
            bool has_pos = false, has_neg = false;
            for (int i = 0; i < n; ++i) {
                // Coarse grid forces plenty of ties.
                s.push_back(rng.uniform_int(0, 9) / 10.0);
                y.push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
                has_pos = has_pos || y.back() == 1.0;
                has_neg = has_neg || y.back() == 0.0;
            }
            if (!has_pos) y[0] = 1.0;
            if (!has_neg) y[1 % n] = 0.0;
            CHECK(auc(s, y) == pairwise_auc(s, y));
        }
    }
    SUBCASE("invariant under strictly increasing transforms") {
        Rng rng(607);
        std::vector<double> s, y;
        for (int i = 0; i < 300; ++i) {
            s.push_back(rng.uniform(-3, 3));
            y.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        }
        y[0] = 1.0;
        y[1] = 0.0;
        const double base = auc(s, y);
        std::vector<double> exp_s = s, affine_s = s;
        for (auto& v : exp_s) v = std::exp(v);
        for (auto& v : affine_s) v = 3.0 * v + 11.0;
        CHECK(auc(exp_s, y) == base);
        CHECK(auc(affine_s, y) == base);
    }
}

TEST_CASE("logloss stationary at the label mean") {
    Rng rng(11);
    std::vector<double> y;
    for (int i = 0; i < 500; ++i) y.push_back(rng.bernoulli(0.37) ? 1.0 : 0.0);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    auto constant_loss = [&](double c) {
        std::vector<double> p(y.size(), c);
        return logloss(p, y);
    };
    const double at_mean = constant_loss(mean);
    for (double delta : {1e-3, 5e-3, 2e-2}) {
        CHECK(constant_loss(mean + delta) >= at_mean);
        CHECK(constant_loss(mean - delta) >= at_mean);
    }
}

TEST_CASE("train runs and improves on a learnable slice") {
    auto ws = small_workspace("kar_pipe_train");
    RunConfig cfg = ws.cfg;
    cfg.backbone = "din";
    cfg.mode = "none";
    cfg.embedding_dim = 8;
    cfg.mlp_sizes = {16, 8};
    cfg.attention_sizes = {8};
    cfg.epochs = 2;
    cfg.patience = 5;
    cfg.batch_size = 64;
    cfg.lr = 5e-3;

    TrainArtifacts art = train(cfg);
    REQUIRE(!art.report.epochs.empty());
    CHECK(art.report.auc >= 0.0);
    CHECK(art.report.auc <= 1.0);
    CHECK(art.report.logloss >= 0.0);

    SUBCASE("same config and seed reproduce metrics to the last digit") {
        TrainArtifacts again = train(cfg);
        CHECK(format_final_metrics(again.report) == format_final_metrics(art.report));
        CHECK(again.report.auc == art.report.auc);
        CHECK(again.report.logloss == art.report.logloss);
    }
}

TEST_CASE("mode=both with a missing augmented cache names the path") {
    auto ws = small_workspace("kar_pipe_missing");
    RunConfig cfg = ws.cfg;
    cfg.mode = "both";
    cfg.use_prestored = true;
    cfg.aug_cache_path = ws.dir + "/definitely_absent.karv";
    try {
        train(cfg);
        FAIL("expected startup error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("definitely_absent.karv") != std::string::npos);
    }
}

TEST_CASE("ablation bookkeeping") {
    auto ws = small_workspace("kar_pipe_ablate");
    RunConfig cfg = ws.cfg;
    cfg.backbone = "dcnv2";
    cfg.embedding_dim = 8;
    cfg.mlp_sizes = {12};
    cfg.cross_layers = 2;
    cfg.aug_dim = 8;
    cfg.encoder_dim = 24;
    cfg.shared_experts = 1;
    cfg.preference_experts = 1;
    cfg.item_experts = 1;
    cfg.epochs = 1;
    cfg.batch_size = 64;

    auto rows = run_ablation(cfg);
    REQUIRE(rows.size() == 4);
    SUBCASE("all four modes share the identical test split") {
        for (const auto& r : rows) CHECK(r.test_hash == rows.front().test_hash);
    }
    SUBCASE("mode order permutation does not change per-mode results") {
        auto permuted = run_ablation(cfg, {AugMode::Both, AugMode::None, AugMode::Reasoning,
                                           AugMode::Fact});
        auto find = [](const std::vector<AblationRow>& rs, const std::string& mode) {
            for (const auto& r : rs)
                if (r.mode == mode) return r.report;
            FAIL("missing mode row");
            return MetricsReport{};
        };
        for (const char* mode : {"none", "fact", "reasoning", "both"}) {
            CHECK(find(rows, mode).auc == find(permuted, mode).auc);
            CHECK(find(rows, mode).logloss == find(permuted, mode).logloss);
        }
    }
    SUBCASE("table formatting lists every mode") {
        const std::string table = format_ablation_table(rows);
        for (const char* mode : {"none", "fact", "reasoning", "both"})
            CHECK(table.find(mode) != std::string::npos);
    }
}

TEST_CASE("bench ordering and variance reporting") {
    auto ws = small_workspace("kar_pipe_bench");
    RunConfig cfg = ws.cfg;
    cfg.backbone = "din";
    cfg.embedding_dim = 8;
    cfg.mlp_sizes = {16};
    cfg.attention_sizes = {8};
    cfg.aug_dim = 8;
    cfg.shared_experts = 2;
    cfg.preference_experts = 2;
    cfg.item_experts = 2;
    cfg.epochs = 1;
    cfg.batch_size = 64;

    // Train the base and kar models, then export augmented vectors.
    RunConfig base_cfg = cfg;
    base_cfg.mode = "none";
    base_cfg.checkpoint_path = ws.dir + "/base.karc";
    train(base_cfg);

    RunConfig kar_cfg = cfg;
    kar_cfg.mode = "both";
    kar_cfg.checkpoint_path = ws.dir + "/kar.karc";
    train(kar_cfg);

    RunConfig exp_cfg = kar_cfg;
    exp_cfg.aug_cache_path = ws.dir + "/aug.karv";
    export_augmented(exp_cfg);

    RunConfig bench_cfg = kar_cfg;
    bench_cfg.base_checkpoint_path = base_cfg.checkpoint_path;
    bench_cfg.aug_cache_path = exp_cfg.aug_cache_path;
    bench_cfg.bench_batches = 12;
    bench_cfg.bench_warmup = 2;
    bench_cfg.batch_size = 64;

    auto rows = bench_inference(bench_cfg);
    REQUIRE(rows.size() == 3);
    auto find = [&](const std::string& v) {
        for (const auto& r : rows)
            if (r.variant == v) return r;
        FAIL("missing variant ", v);
        return BenchRow{};
    };
    const BenchRow pre = find("kar_prestored");
    const BenchRow apt = find("kar_with_adaptor");
    CHECK(apt.mean_s >= pre.mean_s);  // strict superset of work
    for (const auto& r : rows) {
        CHECK(r.batches == 12);
        CHECK(r.std_s >= 0.0);
    }
    const std::string table = format_bench_table(rows);
    CHECK(table.find("base") != std::string::npos);
    CHECK(table.find("kar_prestored") != std::string::npos);
}

TEST_CASE("exported augmented cache round-trips through prestored training") {
    auto ws = small_workspace("kar_pipe_export");
    RunConfig cfg = ws.cfg;
    cfg.backbone = "deepfm";
    cfg.mode = "both";
    cfg.embedding_dim = 8;
    cfg.aug_dim = 8;
    cfg.mlp_sizes = {12};
    cfg.shared_experts = 1;
    cfg.preference_experts = 1;
    cfg.item_experts = 1;
    cfg.epochs = 1;
    cfg.batch_size = 64;
    cfg.checkpoint_path = ws.dir + "/model.karc";
    train(cfg);

    RunConfig exp_cfg = cfg;
    exp_cfg.aug_cache_path = ws.dir + "/aug.karv";
    export_augmented(exp_cfg);

    VectorCache aug = VectorCache::load(exp_cfg.aug_cache_path);
    CHECK(aug.dim() == 8);
    CHECK(aug.size() > 0);

    // Prestored evaluation must run end-to-end on the exported cache.
    RunConfig pre_cfg = exp_cfg;
    pre_cfg.use_prestored = true;
    pre_cfg.checkpoint_path.clear();
    pre_cfg.epochs = 1;
    TrainArtifacts art = train(pre_cfg);
    CHECK(art.report.auc > 0.0);
}

TEST_CASE("non-finite loss aborts with the last good checkpoint") {
    auto ws = small_workspace("kar_pipe_nan");
    RunConfig cfg = ws.cfg;
    cfg.backbone = "deepfm";
    cfg.mode = "none";
    cfg.embedding_dim = 8;
    cfg.mlp_sizes = {8};
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.lr = 1e290;  // drives the FM term to inf - inf
    cfg.checkpoint_path = ws.dir + "/aborted.karc";
    try {
        train(cfg);
        FAIL("expected numeric abort");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::filesystem::exists(cfg.checkpoint_path));
        nn::Checkpoint last = nn::Checkpoint::load(cfg.checkpoint_path);
        for (const auto& [name, t] : last.tensors) CHECK(t.allFinite());
    }
}

TEST_CASE("cli exit codes") {
    const std::string cli = KAR_CLI_PATH;
    const std::string dir =
        (std::filesystem::temp_directory_path() / "kar_cli_test").string();
    std::filesystem::create_directories(dir);

    SUBCASE("unknown config key exits 2") {
        const std::string cfg_path = dir + "/bad.conf";
        std::ofstream(cfg_path) << "definitely_not_a_key = 1\n";
        const int rc = std::system(
            (cli + " train --config " + cfg_path + " >/dev/null 2>&1").c_str());
        CHECK(WEXITSTATUS(rc) == 2);
    }
    SUBCASE("missing data file exits 3") {
        const int rc = std::system(
            (cli + " train --samples " + dir + "/absent.kars >/dev/null 2>&1").c_str());
        CHECK(WEXITSTATUS(rc) == 3);
    }
    SUBCASE("missing required flags exits 2") {
        const int rc = std::system((cli + " prepare-data >/dev/null 2>&1").c_str());
        CHECK(WEXITSTATUS(rc) == 2);
    }
    std::filesystem::remove_all(dir);
}
