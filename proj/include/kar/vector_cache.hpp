#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kar/kinds.hpp"

// Prestored vector container, used both for knowledge representations
// (dim m) and augmented vectors (dim q). Bit-exact layout, little-endian:
//   magic "KARV" | format version u16 | vector dimension u32 | record count u64
//   | index block: (key length u16, key bytes, kind byte, row offset u64)*
//   | packed rows of f32
// The row offset is the byte offset of the row within the row block, i.e.
// row_index * dim * 4. Total file size is exactly
//   18 + sum over records of (11 + key length) + count * dim * 4.

namespace kar {

struct VectorRecord {
    std::string key;
    Kind kind = Kind::Preference;
    Eigen::VectorXf values;
};

class VectorCache {
public:
    // Duplicate (key, kind) keeps the last record and warns on stderr;
    // mixed dimensions are a store error. dim_hint allows an empty cache.
    static void write(const std::string& path, const std::vector<VectorRecord>& records,
                      std::int64_t dim_hint = -1);
    static VectorCache load(const std::string& path);

    const Eigen::VectorXf& find(const std::string& key, Kind kind) const;
    bool contains(const std::string& key, Kind kind) const;
    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return records_.size(); }
    const std::vector<VectorRecord>& records() const { return records_; }

    static std::size_t expected_file_size(std::uint32_t dim,
                                          const std::vector<VectorRecord>& records);

private:
    std::uint32_t dim_ = 0;
    std::vector<VectorRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;  // key + '\0' + kind byte

    static std::string index_key(const std::string& key, Kind kind);
};

}  // namespace kar
