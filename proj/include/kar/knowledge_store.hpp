#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "kar/kinds.hpp"
#include "kar/llm.hpp"
#include "kar/prompting.hpp"

namespace kar {

struct KnowledgeRecord {
    std::string entity_id;
    Kind kind = Kind::Preference;
    std::string prompt_hash;  // hex fnv1a64 of the rendered prompt
    std::string text;
    std::string provenance;   // "live_llm" or "stub"
};

// One JSON object per line with keys {entity_id, kind, prompt_hash, text,
// provenance}. Persistence is append-only; on load the last record per
// (entity_id, kind) wins. Readers may run concurrently; writers are
// serialized internally.
class KnowledgeStore {
public:
    KnowledgeStore() = default;  // unbound, in-memory only

    // Binds to a file, loading existing records when present.
    static KnowledgeStore open(const std::string& path);

    void put(KnowledgeRecord rec);
    std::optional<KnowledgeRecord> find(const std::string& entity_id, Kind kind) const;
    std::size_t size() const;
    std::vector<KnowledgeRecord> all() const;  // deterministic key order

    // Compacted rewrite (one line per key).
    void save(const std::string& path) const;

private:
    // Behind a pointer so the store stays movable.
    mutable std::unique_ptr<std::shared_mutex> mu_ = std::make_unique<std::shared_mutex>();
    std::map<std::pair<std::string, Kind>, KnowledgeRecord> records_;
    std::string path_;  // empty when unbound
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 200;  // doubles per retry
};

// Renders through the client unless the store already holds a record with a
// matching prompt hash. Persists on success. Transport failures are retried
// per the policy (exactly max_attempts calls on persistent failure); an
// empty completion is an immediate error.
KnowledgeRecord generate_knowledge(const PromptRequest& req, LlmClient& llm,
                                   const RetryPolicy& policy, KnowledgeStore& store);

}  // namespace kar
