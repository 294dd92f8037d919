#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "kar/error.hpp"
#include "kar/kinds.hpp"
#include "kar/vector_cache.hpp"

// Knowledge text -> T x m token matrix -> aggregated m-vector. The encoder is
// pluggable: the hashing encoder is fully offline, the precomputed encoder
// reads vectors exported from an external language model.

namespace kar {

class TokenEncoder {
public:
    virtual ~TokenEncoder() = default;
    virtual Eigen::MatrixXd encode(const std::string& entity_id, Kind kind,
                                   const std::string& text) const = 0;
    virtual int dim() const = 0;
};

// Whitespace tokens; each token's embedding is its 64-bit hash expanded into
// m pseudo-random floats in [-1, 1]. Deterministic given (token, seed, m).
class HashingEncoder : public TokenEncoder {
public:
    HashingEncoder(int dim, std::uint64_t seed);

    static Eigen::VectorXd token_embedding(const std::string& token, int dim,
                                           std::uint64_t seed);

    Eigen::MatrixXd encode(const std::string& entity_id, Kind kind,
                           const std::string& text) const override;
    int dim() const override { return dim_; }

private:
    int dim_;
    std::uint64_t seed_;
};

// Looks up a single already-aggregated row per (entity, kind) from a vector
// cache; returns it as a 1 x m token matrix.
class PrecomputedEncoder : public TokenEncoder {
public:
    explicit PrecomputedEncoder(VectorCache cache);

    Eigen::MatrixXd encode(const std::string& entity_id, Kind kind,
                           const std::string& text) const override;
    int dim() const override { return static_cast<int>(cache_.dim()); }

private:
    VectorCache cache_;
};

enum class Aggregation { Avg, Last, Wavg };

Aggregation parse_aggregation(const std::string& name);
const char* aggregation_name(Aggregation a);

// Position weights for the weighted average: w_t = t / sum(1..T),
// linearly increasing and normalized.
Eigen::VectorXd wavg_weights(Eigen::Index t_count);

template <typename Derived>
Eigen::VectorXd aggregate(const Eigen::MatrixBase<Derived>& tokens, Aggregation method) {
    if (tokens.rows() < 1) fail_data("aggregate: token matrix must have T >= 1 rows");
    switch (method) {
    case Aggregation::Avg:
        return tokens.colwise().mean().transpose();
    case Aggregation::Last:
        return tokens.row(tokens.rows() - 1).transpose();
    case Aggregation::Wavg:
        return tokens.transpose() * wavg_weights(tokens.rows());
    }
    fail_config("aggregate: unknown method");
}

}  // namespace kar
