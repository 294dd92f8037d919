#pragma once

#include <Eigen/Dense>
#include <string>

#include "kar/tensor.hpp"

// Straight-line recomputation of the hybrid-expert forward pass: explicit
// loops over experts, plain Eigen arithmetic, no shared code with the
// implementation under test. Parameters are read back by their checkpoint
// names.

namespace kar::testing {

inline Eigen::VectorXd oracle_run_expert(const nn::ParameterStore& ps,
                                         const std::string& name,
                                         const Eigen::VectorXd& x) {
    Eigen::VectorXd h = x;
    for (int l = 0;; ++l) {
        const std::string wname = name + ".w" + std::to_string(l);
        if (!ps.contains(wname)) break;
        const Eigen::MatrixXd& w = ps.at(wname).value;
        const Eigen::MatrixXd& b = ps.at(name + ".b" + std::to_string(l)).value;
        Eigen::VectorXd z = w.transpose() * h + b.transpose();
        if (ps.contains(name + ".w" + std::to_string(l + 1)))
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::max(0.0, z(i));
        h = z;
    }
    return h;
}

inline Eigen::VectorXd oracle_softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd e(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) e(i) = std::exp(logits(i) - mx);
    return e / e.sum();
}

// side: "user" gates over [shared..., pref...]; "item" over [shared..., item...].
inline Eigen::VectorXd oracle_adaptor_side(const nn::ParameterStore& ps,
                                           const std::string& prefix, bool user_side,
                                           int n_shared, int n_dedicated,
                                           const Eigen::VectorXd& x, int out_dim) {
    const std::string gate = prefix + (user_side ? ".gate.user" : ".gate.item");
    const Eigen::MatrixXd& gw = ps.at(gate + ".w").value;
    const Eigen::MatrixXd& gb = ps.at(gate + ".b").value;
    Eigen::VectorXd weights = oracle_softmax(gw.transpose() * x + gb.transpose());

    Eigen::VectorXd out = Eigen::VectorXd::Zero(out_dim);
    int slot = 0;
    for (int k = 0; k < n_shared; ++k, ++slot)
        out += weights(slot) *
               oracle_run_expert(ps, prefix + ".shared." + std::to_string(k), x);
    const char* pool = user_side ? ".pref." : ".item.";
    for (int k = 0; k < n_dedicated; ++k, ++slot)
        out += weights(slot) * oracle_run_expert(ps, prefix + pool + std::to_string(k), x);
    return out;
}

}  // namespace kar::testing
