#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kar/optim.hpp"
#include "kar/tensor.hpp"

// Versioned binary container of named f64 tensors plus string metadata.
// Layout (all little-endian):
//   magic "KARC" | version u16 | meta count u32 | (key u16+bytes, val u16+bytes)*
//   | tensor count u64 | (name u16+bytes, rows u64, cols u64, rows*cols f64 row-major)*

namespace kar::nn {

struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, Mat>> tensors;

    void set_meta(const std::string& key, const std::string& value);
    const std::string* find_meta(const std::string& key) const;

    void add(const std::string& name, Mat t) { tensors.emplace_back(name, std::move(t)); }
    const Mat* find(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Captures parameter values and, when given, Adam slots (named optim.m.* /
// optim.v.*, step count in meta "optim.t").
Checkpoint snapshot(const ParameterStore& params, Adam* opt = nullptr);

// Restores values into an existing store; every checkpoint tensor must match
// an existing parameter's name and shape.
void restore(const Checkpoint& ckpt, ParameterStore& params, Adam* opt = nullptr);

}  // namespace kar::nn
