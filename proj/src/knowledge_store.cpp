#include "kar/knowledge_store.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kar/error.hpp"

namespace kar {

namespace {

nlohmann::json to_json(const KnowledgeRecord& r) {
    return {
        {"entity_id", r.entity_id},
        {"kind", kind_name(r.kind)},
        {"prompt_hash", r.prompt_hash},
        {"text", r.text},
        {"provenance", r.provenance},
    };
}

KnowledgeRecord from_json(const nlohmann::json& j) {
    KnowledgeRecord r;
    r.entity_id = j.at("entity_id").get<std::string>();
    r.kind = parse_kind(j.at("kind").get<std::string>());
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.provenance = j.at("provenance").get<std::string>();
    return r;
}

}  // namespace

KnowledgeStore KnowledgeStore::open(const std::string& path) {
    KnowledgeStore store;
    store.path_ = path;
    if (std::filesystem::exists(path)) {
        std::ifstream is(path);
        if (!is) fail_data("cannot open knowledge store: " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                KnowledgeRecord r = from_json(nlohmann::json::parse(line));
                store.records_[{r.entity_id, r.kind}] = std::move(r);  // last wins
            } catch (const nlohmann::json::exception& e) {
                fail_data(path + ":" + std::to_string(line_no) +
                          ": malformed knowledge record: " + e.what());
            }
        }
    }
    return store;
}

void KnowledgeStore::put(KnowledgeRecord rec) {
    std::unique_lock lock(*mu_);
    if (!path_.empty()) {
        std::ofstream os(path_, std::ios::app);
        if (!os) fail_data("cannot append to knowledge store: " + path_);
        os << to_json(rec).dump() << "\n";
    }
    records_[{rec.entity_id, rec.kind}] = std::move(rec);
}

std::optional<KnowledgeRecord> KnowledgeStore::find(const std::string& entity_id,
                                                    Kind kind) const {
    std::shared_lock lock(*mu_);
    auto it = records_.find({entity_id, kind});
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::size_t KnowledgeStore::size() const {
    std::shared_lock lock(*mu_);
    return records_.size();
}

std::vector<KnowledgeRecord> KnowledgeStore::all() const {
    std::shared_lock lock(*mu_);
    std::vector<KnowledgeRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
}

void KnowledgeStore::save(const std::string& path) const {
    std::shared_lock lock(*mu_);
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail_data("cannot write knowledge store: " + path);
    for (const auto& [_, r] : records_) os << to_json(r).dump() << "\n";
}

KnowledgeRecord generate_knowledge(const PromptRequest& req, LlmClient& llm,
                                   const RetryPolicy& policy, KnowledgeStore& store) {
    const std::string hash = req.prompt_hash_hex();
    if (auto cached = store.find(req.entity_id, req.kind);
        cached && cached->prompt_hash == hash)
        return *cached;

    std::string text;
    for (int attempt = 1;; ++attempt) {
        try {
            text = llm.complete(req.text);
            break;
        } catch (const LlmTransportError& e) {
            if (attempt >= policy.max_attempts)
                fail_data("knowledge generation failed after " +
                          std::to_string(attempt) + " attempts for entity '" +
                          req.entity_id + "': " + e.what());
            const auto delay = std::chrono::milliseconds(
                static_cast<long>(policy.base_delay_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
    }
    if (text.empty())
        fail_data("llm returned empty knowledge for entity '" + req.entity_id + "'");

    KnowledgeRecord rec{req.entity_id, req.kind, hash, std::move(text), llm.provenance()};
    store.put(rec);
    return rec;
}

}  // namespace kar
