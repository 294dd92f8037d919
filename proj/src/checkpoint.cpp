#include "kar/checkpoint.hpp"

#include "kar/io.hpp"

namespace kar::nn {

namespace {
constexpr char kMagic[4] = {'K', 'A', 'R', 'C'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta) {
        if (k == key) {
            v = value;
            return;
        }
    }
    meta.emplace_back(key, value);
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

const Mat* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void Checkpoint::save(const std::string& path) const {
    auto os = io::open_out(path);
    io::write_bytes(os, kMagic, 4);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        io::write_string(os, k);
        if (v.size() > 0xffff) fail_data("checkpoint meta value too long: " + k);
        io::write_string(os, v);
    }
    io::write_le<std::uint64_t>(os, tensors.size());
    for (const auto& [name, t] : tensors) {
        io::write_string(os, name);
        io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.rows()));
        io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j)
                io::write_f64(os, t(i, j));
    }
}

Checkpoint Checkpoint::load(const std::string& path) {
    auto is = io::open_in(path);
    char magic[4];
    io::read_bytes(is, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        fail_data("not a checkpoint file: " + path);
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        fail_data("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    const auto n_meta = io::read_le<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = io::read_string(is);
        std::string v = io::read_string(is);
        c.meta.emplace_back(std::move(k), std::move(v));
    }
    const auto n_tensors = io::read_le<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        std::string name = io::read_string(is);
        const auto rows = static_cast<Eigen::Index>(io::read_le<std::uint64_t>(is));
        const auto cols = static_cast<Eigen::Index>(io::read_le<std::uint64_t>(is));
        Mat t(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index cidx = 0; cidx < cols; ++cidx)
                t(r, cidx) = io::read_f64(is);
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    return c;
}

Checkpoint snapshot(const ParameterStore& params, Adam* opt) {
    Checkpoint c;
    for (const auto& p : params) c.add(p->name, p->value);
    if (opt) {
        c.set_meta("optim.t", std::to_string(opt->steps()));
        for (const auto& p : params) {
            const Adam::Slot& s = opt->slot(p->name);
            c.add("optim.m." + p->name, s.m);
            c.add("optim.v." + p->name, s.v);
        }
    }
    return c;
}

void restore(const Checkpoint& ckpt, ParameterStore& params, Adam* opt) {
    for (const auto& p : params) {
        const Mat* t = ckpt.find(p->name);
        if (!t) fail_data("checkpoint missing parameter: " + p->name);
        if (t->rows() != p->value.rows() || t->cols() != p->value.cols())
            fail_data("checkpoint shape mismatch for " + p->name + ": " +
                      shape_str(*t) + " vs " + shape_str(p->value));
        p->value = *t;
    }
    if (opt) {
        const std::string* t = ckpt.find_meta("optim.t");
        if (!t) fail_data("checkpoint has no optimizer state");
        opt->set_steps(std::stoll(*t));
        for (const auto& p : params) {
            const Mat* m = ckpt.find("optim.m." + p->name);
            const Mat* v = ckpt.find("optim.v." + p->name);
            if (!m || !v) fail_data("checkpoint missing optimizer slots for " + p->name);
            Adam::Slot& s = opt->slot(p->name);
            s.m = *m;
            s.v = *v;
        }
    }
}

}  // namespace kar::nn
