#include "kar/encoding.hpp"

#include <sstream>

#include "kar/rng.hpp"

namespace kar {

HashingEncoder::HashingEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) fail_config("hashing encoder: dim must be >= 1");
}

Eigen::VectorXd HashingEncoder::token_embedding(const std::string& token, int dim,
                                                std::uint64_t seed) {
    Rng rng(mix64(fnv1a64(token) ^ seed));
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

Eigen::MatrixXd HashingEncoder::encode(const std::string&, Kind,
                                       const std::string& text) const {
    std::istringstream is(text);
    std::vector<std::string> tokens;
    std::string tok;
    while (is >> tok) tokens.push_back(tok);
    if (tokens.empty()) fail_data("encode: empty text");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(tokens.size()), dim_);
    for (std::size_t t = 0; t < tokens.size(); ++t)
        m.row(static_cast<Eigen::Index>(t)) = token_embedding(tokens[t], dim_, seed_).transpose();
    return m;
}

PrecomputedEncoder::PrecomputedEncoder(VectorCache cache) : cache_(std::move(cache)) {}

Eigen::MatrixXd PrecomputedEncoder::encode(const std::string& entity_id, Kind kind,
                                           const std::string& text) const {
    if (text.empty()) fail_data("encode: empty text");
    const Eigen::VectorXf& row = cache_.find(entity_id, kind);
    return row.cast<double>().transpose();
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "avg") return Aggregation::Avg;
    if (name == "last") return Aggregation::Last;
    if (name == "wavg") return Aggregation::Wavg;
    fail_config("unknown aggregation method: " + name);
}

const char* aggregation_name(Aggregation a) {
    switch (a) {
    case Aggregation::Avg: return "avg";
    case Aggregation::Last: return "last";
    case Aggregation::Wavg: return "wavg";
    }
    return "?";
}

Eigen::VectorXd wavg_weights(Eigen::Index t_count) {
    Eigen::VectorXd w(t_count);
    const double denom = static_cast<double>(t_count) * static_cast<double>(t_count + 1) / 2.0;
    for (Eigen::Index t = 0; t < t_count; ++t) w[t] = static_cast<double>(t + 1) / denom;
    return w;
}

}  // namespace kar
