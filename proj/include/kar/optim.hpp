#pragma once

#include <cstdint>
#include <unordered_map>

#include "kar/tensor.hpp"

namespace kar::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. A non-finite gradient rejects the whole step
// before any state is touched.
class Adam {
public:
    explicit Adam(ParameterStore& store, AdamConfig cfg = {});

    void step();
    std::int64_t steps() const { return t_; }

    struct Slot {
        Mat m;
        Mat v;
    };
    Slot& slot(const std::string& name);
    void set_steps(std::int64_t t) { t_ = t; }

private:
    ParameterStore* store_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Slot> slots_;
};

}  // namespace kar::nn
