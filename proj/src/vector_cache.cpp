#include "kar/vector_cache.hpp"

#include <iostream>

#include "kar/io.hpp"

namespace kar {

namespace {
constexpr char kMagic[4] = {'K', 'A', 'R', 'V'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

std::string VectorCache::index_key(const std::string& key, Kind kind) {
    std::string k = key;
    k.push_back('\0');
    k.push_back(static_cast<char>(kind));
    return k;
}

std::size_t VectorCache::expected_file_size(std::uint32_t dim,
                                            const std::vector<VectorRecord>& records) {
    std::size_t size = 4 + 2 + 4 + 8;
    for (const auto& r : records) size += 2 + r.key.size() + 1 + 8;
    size += records.size() * static_cast<std::size_t>(dim) * 4;
    return size;
}

void VectorCache::write(const std::string& path, const std::vector<VectorRecord>& records,
                        std::int64_t dim_hint) {
    // Deduplicate first so offsets in the index match the rows we emit.
    std::vector<VectorRecord> unique;
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& r : records) {
        const std::string ik = index_key(r.key, r.kind);
        auto it = seen.find(ik);
        if (it != seen.end()) {
            std::cerr << "vector cache: overwriting duplicate key '" << r.key << "' ("
                      << kind_name(r.kind) << ")\n";
            unique[it->second] = r;
        } else {
            seen.emplace(ik, unique.size());
            unique.push_back(r);
        }
    }

    std::int64_t dim = dim_hint;
    for (const auto& r : unique) {
        if (dim < 0) dim = r.values.size();
        if (r.values.size() != dim)
            fail_data("vector cache: mixed dimensions " + std::to_string(r.values.size()) +
                      " and " + std::to_string(dim) + " (key '" + r.key + "')");
    }
    if (dim < 0) fail_data("vector cache: cannot infer dimension of an empty batch");

    auto os = io::open_out(path);
    io::write_bytes(os, kMagic, 4);
    io::write_le<std::uint16_t>(os, kVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
    io::write_le<std::uint64_t>(os, unique.size());
    std::uint64_t offset = 0;
    for (const auto& r : unique) {
        io::write_string(os, r.key);
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.kind));
        io::write_le<std::uint64_t>(os, offset);
        offset += static_cast<std::uint64_t>(dim) * 4;
    }
    for (const auto& r : unique)
        for (Eigen::Index i = 0; i < r.values.size(); ++i) io::write_f32(os, r.values[i]);
}

VectorCache VectorCache::load(const std::string& path) {
    auto is = io::open_in(path);
    char magic[4];
    io::read_bytes(is, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) fail_data("not a vector cache file: " + path);
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kVersion)
        fail_data("unsupported vector cache version " + std::to_string(version));

    VectorCache cache;
    cache.dim_ = io::read_le<std::uint32_t>(is);
    const auto count = io::read_le<std::uint64_t>(is);
    std::vector<std::uint64_t> offsets;
    offsets.reserve(count);
    cache.records_.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        VectorRecord& r = cache.records_[i];
        r.key = io::read_string(is);
        r.kind = static_cast<Kind>(io::read_le<std::uint8_t>(is));
        offsets.push_back(io::read_le<std::uint64_t>(is));
        cache.index_[index_key(r.key, r.kind)] = i;
    }
    const std::uint64_t row_bytes = static_cast<std::uint64_t>(cache.dim_) * 4;
    for (std::uint64_t i = 0; i < count; ++i) {
        if (offsets[i] != i * row_bytes)
            fail_data("vector cache: unexpected row offset in " + path);
        VectorRecord& r = cache.records_[i];
        r.values.resize(cache.dim_);
        for (std::uint32_t j = 0; j < cache.dim_; ++j) r.values[j] = io::read_f32(is);
    }
    return cache;
}

bool VectorCache::contains(const std::string& key, Kind kind) const {
    return index_.count(index_key(key, kind)) > 0;
}

const Eigen::VectorXf& VectorCache::find(const std::string& key, Kind kind) const {
    auto it = index_.find(index_key(key, kind));
    if (it == index_.end())
        fail_data("vector cache: no entry for key '" + key + "' (" + kind_name(kind) + ")");
    return records_[it->second].values;
}

}  // namespace kar
