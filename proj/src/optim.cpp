#include "kar/optim.hpp"

#include <cmath>

namespace kar::nn {

Adam::Adam(ParameterStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {}

Adam::Slot& Adam::slot(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) {
        const Parameter& p = store_->at(name);
        Slot s{Mat::Zero(p.value.rows(), p.value.cols()),
               Mat::Zero(p.value.rows(), p.value.cols())};
        it = slots_.emplace(name, std::move(s)).first;
    }
    return it->second;
}

void Adam::step() {
    for (const auto& p : *store_) {
        if (!p->grad.allFinite())
            fail_numeric("adam: non-finite gradient for parameter '" + p->name +
                         "', step " + std::to_string(t_ + 1) + " rejected");
    }
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& p : *store_) {
        Slot& s = slot(p->name);
        s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p->grad;
        s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
        p->value.array() -=
            cfg_.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
    }
}

}  // namespace kar::nn
