#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kar/config.hpp"
#include "kar/error.hpp"
#include "kar/pipeline.hpp"
#include "kar/rng.hpp"
#include "kar/synthetic.hpp"

namespace {

using namespace kar;

ScenarioFactors resolve_factors(const RunConfig& cfg) {
    ScenarioFactors f;
    f.scenario = cfg.scenario;
    if (!cfg.factors_override.empty()) {
        f.names = cfg.factors_override;
    } else if (!cfg.factors_path.empty() && std::filesystem::exists(cfg.factors_path)) {
        std::ifstream is(cfg.factors_path);
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) f.names.push_back(line);
    } else if (cfg.scenario == "movie") {
        return ScenarioFactors::movie_defaults();
    } else if (cfg.scenario == "news") {
        return ScenarioFactors::news_defaults();
    } else {
        fail_config("no factors configured for scenario '" + cfg.scenario +
                    "'; pass --factors or --factors-file");
    }
    f.validate();
    return f;
}

void cmd_prepare_data(const RunConfig& cfg) {
    if (cfg.data_dir.empty() || cfg.samples_path.empty())
        fail_config("prepare-data needs --data-dir and --samples");
    data::MovieLensRaw raw = data::load_movielens_dir(cfg.data_dir);
    data::UserSplit split = data::split_by_user(raw.interactions, cfg.split_ratio, cfg.seed);
    data::BuildResult built = data::build_samples(raw, split, cfg.max_history);
    built.samples.save(cfg.samples_path);
    std::cout << "interactions: " << raw.interactions.size() << "\n"
              << "train users:  " << split.train_users.size() << "\n"
              << "test users:   " << split.test_users.size() << "\n"
              << "train samples: " << built.samples.train.size() << "\n"
              << "test samples:  " << built.samples.test.size() << "\n"
              << "wrote " << cfg.samples_path << "\n";
}

void cmd_elicit_factors(const RunConfig& cfg) {
    ScenarioFactors seed_factors;
    seed_factors.scenario = cfg.scenario;
    if (cfg.scenario == "movie") seed_factors = ScenarioFactors::movie_defaults();
    if (cfg.scenario == "news") seed_factors = ScenarioFactors::news_defaults();
    auto client = make_llm_client(cfg, seed_factors);
    ScenarioFactors f = elicit_factors(cfg.scenario, *client, cfg.factors_override);
    for (const auto& name : f.names) std::cout << name << "\n";
    if (!cfg.factors_path.empty()) {
        std::ofstream os(cfg.factors_path, std::ios::trunc);
        if (!os) fail_data("cannot write factors file: " + cfg.factors_path);
        for (const auto& name : f.names) os << name << "\n";
        std::cout << "wrote " << cfg.factors_path << "\n";
    }
}

void cmd_gen_prompts(const RunConfig& cfg) {
    if (cfg.data_dir.empty() || cfg.samples_path.empty() || cfg.prompts_path.empty())
        fail_config("gen-prompts needs --data-dir, --samples and --prompts");
    data::MovieLensRaw raw = data::load_movielens_dir(cfg.data_dir);
    data::SampleSet set = data::SampleSet::load(cfg.samples_path);
    ScenarioFactors factors = resolve_factors(cfg);
    auto prompts = build_all_prompts(raw, set, factors, cfg.max_history);
    save_prompts(cfg.prompts_path, prompts);
    std::cout << "rendered " << prompts.size() << " prompts to " << cfg.prompts_path << "\n";
}

void cmd_gen_knowledge(const RunConfig& cfg) {
    if (cfg.prompts_path.empty() || cfg.knowledge_path.empty())
        fail_config("gen-knowledge needs --prompts and --knowledge-store");
    auto prompts = load_prompts(cfg.prompts_path);
    ScenarioFactors factors = resolve_factors(cfg);
    auto client = make_llm_client(cfg, factors);
    KnowledgeStore store = KnowledgeStore::open(cfg.knowledge_path);
    RetryPolicy policy{cfg.llm_retries, cfg.llm_backoff_ms};
    const std::size_t added = generate_all(prompts, *client, policy, store, cfg.workers);
    std::cout << "generated " << added << " new records (store now holds " << store.size()
              << ") in " << cfg.knowledge_path << "\n";
}

void cmd_encode(const RunConfig& cfg) {
    if (cfg.knowledge_path.empty() || cfg.rep_cache_path.empty())
        fail_config("encode needs --knowledge-store and --rep-cache");
    KnowledgeStore store = KnowledgeStore::open(cfg.knowledge_path);
    if (store.size() == 0) fail_data("knowledge store is empty: " + cfg.knowledge_path);
    std::unique_ptr<TokenEncoder> encoder;
    if (cfg.encoder == "hash") {
        encoder = std::make_unique<HashingEncoder>(cfg.encoder_dim,
                                                   derive_seed(cfg.seed, "encoder"));
    } else if (cfg.encoder == "precomputed") {
        if (cfg.precomputed_path.empty())
            fail_config("encoder=precomputed needs --precomputed");
        encoder = std::make_unique<PrecomputedEncoder>(VectorCache::load(cfg.precomputed_path));
    } else {
        fail_config("unknown encoder: " + cfg.encoder);
    }
    auto records = encode_store(store, *encoder, cfg.aggregation_method());
    VectorCache::write(cfg.rep_cache_path, records);
    std::cout << "encoded " << records.size() << " representations (dim "
              << encoder->dim() << ") to " << cfg.rep_cache_path << "\n";
}

void print_report(const MetricsReport& r) {
    std::cout << "epoch  train_loss  first10   last10    test_auc  test_loss  secs\n";
    for (const auto& e : r.epochs) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-5d  %.6f  %.6f  %.6f  %.6f  %.6f  %.1f\n",
                      e.epoch, e.train_logloss, e.first_batches_logloss,
                      e.last_batches_logloss, e.test_auc, e.test_logloss, e.seconds);
        std::cout << line;
    }
    std::cout << "final " << format_final_metrics(r) << "\n";
}

void cmd_train(const RunConfig& cfg) {
    if (cfg.samples_path.empty()) fail_config("train needs --samples");
    TrainArtifacts art = train(cfg);
    print_report(art.report);
    if (!cfg.checkpoint_path.empty())
        std::cout << "checkpoint: " << cfg.checkpoint_path << "\n";
}

void cmd_ablate(const RunConfig& cfg) {
    if (cfg.samples_path.empty()) fail_config("ablate needs --samples");
    auto rows = run_ablation(cfg);
    std::cout << format_ablation_table(rows);
    if (!cfg.report_path.empty()) {
        std::ofstream os(cfg.report_path, std::ios::trunc);
        if (!os) fail_data("cannot write report: " + cfg.report_path);
        for (const auto& r : rows)
            os << "{\"event\":\"ablation\",\"mode\":\"" << r.mode << "\",\"auc\":"
               << r.report.auc << ",\"logloss\":" << r.report.logloss << "}\n";
    }
}

void cmd_bench(const RunConfig& cfg) {
    auto rows = bench_inference(cfg);
    std::cout << format_bench_table(rows);
}

void cmd_export_augmented(const RunConfig& cfg) {
    export_augmented(cfg);
    std::cout << "wrote augmented vectors to " << cfg.aug_cache_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KAR: LLM-knowledge-augmented CTR recommendation pipeline"};
    app.require_subcommand(1);

    kar::RunConfig cfg;
    // The config file applies first so that explicit flags override it.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--config") == 0) {
            try {
                cfg.apply_file(argv[i + 1]);
            } catch (const kar::Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return e.exit_code();
            }
        }
    }

    std::string config_path;
    std::string synth_kind = "topic";
    std::string synth_out;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--data-dir", cfg.data_dir, "MovieLens-format directory");
        sub->add_option("--samples", cfg.samples_path, "binary sample file");
        sub->add_option("--knowledge-store", cfg.knowledge_path, "knowledge JSONL path");
        sub->add_option("--prompts", cfg.prompts_path, "rendered prompts JSONL path");
        sub->add_option("--rep-cache", cfg.rep_cache_path, "representation cache path");
        sub->add_option("--aug-cache", cfg.aug_cache_path, "augmented-vector cache path");
        sub->add_option("--checkpoint", cfg.checkpoint_path, "model checkpoint path");
        sub->add_option("--base-checkpoint", cfg.base_checkpoint_path,
                        "plain backbone checkpoint (bench)");
        sub->add_option("--report", cfg.report_path, "report JSONL path");
        sub->add_option("--factors-file", cfg.factors_path, "factors file (one per line)");
        sub->add_option("--precomputed", cfg.precomputed_path,
                        "precomputed embedding cache (encoder=precomputed)");
        sub->add_option("--split-ratio", cfg.split_ratio, "train share of users");
        sub->add_option("--max-history", cfg.max_history, "history truncation length");
        sub->add_option("--slice", cfg.slice, "cap on training samples (0 = all)");
        sub->add_option("--seed", cfg.seed, "run seed");
        sub->add_option("--scenario", cfg.scenario, "recommendation scenario");
        sub->add_option("--llm", cfg.llm, "llm client: stub | live");
        sub->add_option("--llm-base-url", cfg.llm_base_url, "chat-completion base url");
        sub->add_option("--llm-api-path", cfg.llm_api_path, "chat-completion path");
        sub->add_option("--llm-model", cfg.llm_model, "model name sent to the API");
        sub->add_option("--llm-max-tokens", cfg.llm_max_tokens, "completion token cap");
        sub->add_option("--llm-timeout-s", cfg.llm_timeout_s, "request timeout");
        sub->add_option("--llm-retries", cfg.llm_retries, "max attempts per prompt");
        sub->add_option("--llm-backoff-ms", cfg.llm_backoff_ms, "base retry backoff");
        sub->add_option("--workers", cfg.workers, "knowledge generation workers");
        sub->add_option_function<std::string>(
            "--factors", [&cfg](const std::string& s) { cfg.factors_override = kar::parse_string_list(s); },
            "comma-separated factor override");
        sub->add_option("--encoder", cfg.encoder, "hash | precomputed");
        sub->add_option("--encoder-dim", cfg.encoder_dim, "hashing encoder dimension m");
        sub->add_option("--aggregation", cfg.aggregation, "avg | last | wavg");
        sub->add_option("--adaptor-variant", cfg.adaptor_variant, "hybrid | moe | mlp");
        sub->add_option("--shared-experts", cfg.shared_experts, "shared expert count");
        sub->add_option("--preference-experts", cfg.preference_experts,
                        "preference-dedicated expert count");
        sub->add_option("--item-experts", cfg.item_experts, "item-dedicated expert count");
        sub->add_option("--aug-dim", cfg.aug_dim, "augmented vector dimension q");
        sub->add_option("--backbone", cfg.backbone, "din | deepfm | dcnv2");
        sub->add_option("--mode", cfg.mode, "none | fact | reasoning | both");
        sub->add_option("--embedding-dim", cfg.embedding_dim, "field embedding size d");
        sub->add_option_function<std::string>(
            "--mlp-sizes", [&cfg](const std::string& s) { cfg.mlp_sizes = kar::parse_int_list(s); },
            "output MLP hidden sizes, e.g. 200,80");
        sub->add_option("--cross-layers", cfg.cross_layers, "DCNv2 cross depth");
        sub->add_option_function<std::string>(
            "--attention-sizes",
            [&cfg](const std::string& s) { cfg.attention_sizes = kar::parse_int_list(s); },
            "DIN attention hidden sizes, e.g. 80,40");
        sub->add_option("--lr", cfg.lr, "Adam learning rate");
        sub->add_option("--batch-size", cfg.batch_size, "minibatch size");
        sub->add_option("--epochs", cfg.epochs, "max epochs");
        sub->add_option("--patience", cfg.patience, "early-stop patience on test AUC");
        sub->add_flag("--use-prestored", cfg.use_prestored,
                      "serve augmented vectors from the cache (adaptor detached)");
        sub->add_option("--bench-batches", cfg.bench_batches, "measured batches");
        sub->add_option("--bench-warmup", cfg.bench_warmup, "warm-up batches");
    };

    struct Sub {
        const char* name;
        const char* desc;
        void (*fn)(const kar::RunConfig&);
    };
    const Sub subs[] = {
        {"prepare-data", "parse MovieLens files, split by user, build samples", cmd_prepare_data},
        {"elicit-factors", "obtain scenario-specific factors", cmd_elicit_factors},
        {"gen-prompts", "render preference and item prompts", cmd_gen_prompts},
        {"gen-knowledge", "drive the LLM over rendered prompts", cmd_gen_knowledge},
        {"encode", "encode knowledge texts into a representation cache", cmd_encode},
        {"train", "train a backbone (joint with the adaptor when mode != none)", cmd_train},
        {"ablate", "train across augmentation modes and compare", cmd_ablate},
        {"bench", "per-batch inference timing: base vs adaptor vs prestored", cmd_bench},
        {"export-augmented", "prestore adaptor outputs for detached inference", cmd_export_augmented},
    };
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.desc);
        add_common(sub);
        auto fn = s.fn;
        sub->callback([&cfg, fn] { fn(cfg); });
    }

    CLI::App* synth = app.add_subcommand("synth-data", "generate a MovieLens-format corpus");
    add_common(synth);
    synth->add_option("--kind", synth_kind, "topic | bias");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->callback([&] {
        if (synth_kind == "topic") {
            kar::TopicDatasetConfig tc;
            tc.seed = cfg.seed;
            kar::write_topic_dataset(synth_out, tc);
        } else if (synth_kind == "bias") {
            kar::BiasDatasetConfig bc;
            bc.seed = cfg.seed;
            kar::write_bias_dataset(synth_out, bc);
        } else {
            kar::fail_config("unknown synthetic dataset kind: " + synth_kind);
        }
        std::cout << "wrote " << synth_kind << " dataset to " << synth_out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const kar::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
