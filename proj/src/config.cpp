#include "kar/config.hpp"

#include <fstream>
#include <sstream>

#include "kar/error.hpp"

namespace kar {

namespace {

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail_config("config: bad number for " + key + ": '" + v + "'");
    }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        fail_config("config: bad integer for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail_config("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        out.push_back(static_cast<int>(to_int("list", part)));
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "data_dir") data_dir = value;
    else if (key == "samples") samples_path = value;
    else if (key == "knowledge_store") knowledge_path = value;
    else if (key == "prompts") prompts_path = value;
    else if (key == "rep_cache") rep_cache_path = value;
    else if (key == "aug_cache") aug_cache_path = value;
    else if (key == "checkpoint") checkpoint_path = value;
    else if (key == "base_checkpoint") base_checkpoint_path = value;
    else if (key == "report") report_path = value;
    else if (key == "factors_file") factors_path = value;
    else if (key == "precomputed") precomputed_path = value;
    else if (key == "split_ratio") split_ratio = to_double(key, value);
    else if (key == "max_history") max_history = static_cast<int>(to_int(key, value));
    else if (key == "slice") slice = to_int(key, value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "scenario") scenario = value;
    else if (key == "llm") llm = value;
    else if (key == "llm_base_url") llm_base_url = value;
    else if (key == "llm_api_path") llm_api_path = value;
    else if (key == "llm_model") llm_model = value;
    else if (key == "llm_temperature") llm_temperature = to_double(key, value);
    else if (key == "llm_max_tokens") llm_max_tokens = static_cast<int>(to_int(key, value));
    else if (key == "llm_timeout_s") llm_timeout_s = static_cast<int>(to_int(key, value));
    else if (key == "llm_token_env") llm_token_env = value;
    else if (key == "llm_retries") llm_retries = static_cast<int>(to_int(key, value));
    else if (key == "llm_backoff_ms") llm_backoff_ms = static_cast<int>(to_int(key, value));
    else if (key == "workers") workers = static_cast<int>(to_int(key, value));
    else if (key == "factors") factors_override = parse_string_list(value);
    else if (key == "encoder") encoder = value;
    else if (key == "encoder_dim") encoder_dim = static_cast<int>(to_int(key, value));
    else if (key == "aggregation") aggregation = value;
    else if (key == "adaptor_variant") adaptor_variant = value;
    else if (key == "shared_experts") shared_experts = static_cast<int>(to_int(key, value));
    else if (key == "preference_experts") preference_experts = static_cast<int>(to_int(key, value));
    else if (key == "item_experts") item_experts = static_cast<int>(to_int(key, value));
    else if (key == "aug_dim") aug_dim = static_cast<int>(to_int(key, value));
    else if (key == "backbone") backbone = value;
    else if (key == "mode") mode = value;
    else if (key == "embedding_dim") embedding_dim = static_cast<int>(to_int(key, value));
    else if (key == "mlp_sizes") mlp_sizes = parse_int_list(value);
    else if (key == "cross_layers") cross_layers = static_cast<int>(to_int(key, value));
    else if (key == "attention_sizes") attention_sizes = parse_int_list(value);
    else if (key == "lr") lr = to_double(key, value);
    else if (key == "beta1") beta1 = to_double(key, value);
    else if (key == "beta2") beta2 = to_double(key, value);
    else if (key == "adam_eps") adam_eps = to_double(key, value);
    else if (key == "batch_size") batch_size = static_cast<int>(to_int(key, value));
    else if (key == "epochs") epochs = static_cast<int>(to_int(key, value));
    else if (key == "patience") patience = static_cast<int>(to_int(key, value));
    else if (key == "use_prestored") use_prestored = to_bool(key, value);
    else if (key == "bench_batches") bench_batches = static_cast<int>(to_int(key, value));
    else if (key == "bench_warmup") bench_warmup = static_cast<int>(to_int(key, value));
    else fail_config("config: unknown key '" + key + "'");
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_config("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail_config(path + ":" + std::to_string(line_no) + ": expected key = value");
        apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

BackboneConfig RunConfig::backbone_config() const {
    BackboneConfig b;
    b.kind = parse_backbone_kind(backbone);
    b.embedding_dim = embedding_dim;
    b.mlp_sizes = mlp_sizes;
    b.cross_layers = cross_layers;
    b.attention_sizes = attention_sizes;
    b.mode = parse_aug_mode(mode);
    b.aug_dim = aug_dim;
    b.validate();
    return b;
}

AdaptorConfig RunConfig::adaptor_config(int rep_dim) const {
    AdaptorConfig a;
    a.input_dim = rep_dim;
    a.output_dim = aug_dim;
    a.shared_experts = shared_experts;
    a.preference_experts = preference_experts;
    a.item_experts = item_experts;
    a.variant = parse_adaptor_variant(adaptor_variant);
    a.validate();
    return a;
}

LlmConfig RunConfig::llm_config() const {
    LlmConfig c;
    c.base_url = llm_base_url;
    c.path = llm_api_path;
    c.model = llm_model;
    c.temperature = llm_temperature;
    c.max_tokens = llm_max_tokens;
    c.timeout_s = llm_timeout_s;
    c.token_env = llm_token_env;
    return c;
}

}  // namespace kar
