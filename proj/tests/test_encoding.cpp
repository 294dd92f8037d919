#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kar/encoding.hpp"
#include "kar/error.hpp"
#include "kar/rng.hpp"
#include "kar/vector_cache.hpp"

using namespace kar;

namespace {
std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("hashing encoder") {
    HashingEncoder enc(16, 77);
    SUBCASE("rows are the per-token hash embeddings") {
        Eigen::MatrixXd m = enc.encode("e", Kind::Preference, "a b");
        REQUIRE(m.rows() == 2);
        REQUIRE(m.cols() == 16);
        CHECK(m.row(0).transpose() == HashingEncoder::token_embedding("a", 16, 77));
        CHECK(m.row(1).transpose() == HashingEncoder::token_embedding("b", 16, 77));
    }
    SUBCASE("same text twice is identical") {
        CHECK(enc.encode("e", Kind::Preference, "x y z") ==
              enc.encode("e", Kind::Preference, "x y z"));
    }
    SUBCASE("empty text is an encode error") {
        CHECK_THROWS_AS(enc.encode("e", Kind::Preference, "   "), Error);
    }
}

TEST_CASE("precomputed encoder") {
    const auto path = temp_path("kar_precomp.karv");
    Eigen::VectorXf v(4);
    v << 1.f, 2.f, 3.f, 4.f;
    VectorCache::write(path, {{"known", Kind::ItemFactual, v}});
    PrecomputedEncoder enc(VectorCache::load(path));
    SUBCASE("known entity returns a 1 x m matrix") {
        Eigen::MatrixXd m = enc.encode("known", Kind::ItemFactual, "whatever text");
        REQUIRE(m.rows() == 1);
        CHECK(m(0, 2) == doctest::Approx(3.0));
    }
    SUBCASE("missing entity is a lookup error") {
        CHECK_THROWS_AS(enc.encode("absent", Kind::ItemFactual, "t"), Error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("aggregate") {
    Eigen::MatrixXd rows(2, 2);
    rows << 1, 3, 3, 5;
    SUBCASE("avg") {
        Eigen::VectorXd r = aggregate(rows, Aggregation::Avg);
        CHECK(r(0) == doctest::Approx(2.0));
        CHECK(r(1) == doctest::Approx(4.0));
    }
    SUBCASE("last") {
        Eigen::VectorXd r = aggregate(rows, Aggregation::Last);
        CHECK(r(0) == doctest::Approx(3.0));
        CHECK(r(1) == doctest::Approx(5.0));
    }
    SUBCASE("wavg with weights 1/3, 2/3") {
        // Independent recomputation: (1*1 + 2*3)/3 and (1*3 + 2*5)/3.
        Eigen::VectorXd r = aggregate(rows, Aggregation::Wavg);
        CHECK(r(0) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
        CHECK(r(1) == doctest::Approx(13.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("unknown method name is a config error") {
        CHECK_THROWS_AS(parse_aggregation("median"), Error);
    }
}

TEST_CASE("aggregation properties") {
    Rng rng(55);
    SUBCASE("avg is permutation-invariant; last is not") {
        Eigen::MatrixXd m(3, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = rng.uniform(-2, 2);
        Eigen::MatrixXd shuffled(3, 4);
        shuffled.row(0) = m.row(2);
        shuffled.row(1) = m.row(0);
        shuffled.row(2) = m.row(1);
        CHECK((aggregate(m, Aggregation::Avg) - aggregate(shuffled, Aggregation::Avg))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((aggregate(m, Aggregation::Last) - aggregate(shuffled, Aggregation::Last))
                  .cwiseAbs()
                  .maxCoeff() > 1e-9);  // witness rows are distinct w.p. 1
    }
    SUBCASE("wavg weights: positive, nondecreasing, sum to 1") {
        for (int t = 1; t <= 40; ++t) {
            Eigen::VectorXd w = wavg_weights(t);
            CHECK(std::abs(w.sum() - 1.0) < 1e-12);
            for (int i = 0; i < t; ++i) CHECK(w(i) > 0.0);
            for (int i = 1; i < t; ++i) CHECK(w(i) >= w(i - 1));
        }
    }
    SUBCASE("single token: all three methods return the row") {
        Eigen::MatrixXd one(1, 5);
        for (int j = 0; j < 5; ++j) one(0, j) = rng.uniform(-3, 3);
        for (auto m : {Aggregation::Avg, Aggregation::Last, Aggregation::Wavg})
            CHECK((aggregate(one, m) - one.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("vector cache") {
    const auto path = temp_path("kar_cache.karv");
    Rng rng(1);

    SUBCASE("store three, load each bit-exactly; absent key errors") {
        std::vector<VectorRecord> recs;
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXf v(8);
            for (int j = 0; j < 8; ++j) v(j) = static_cast<float>(rng.uniform(-1, 1));
            recs.push_back({"k" + std::to_string(i),
                            i % 2 ? Kind::ItemFactual : Kind::Preference, v});
        }
        VectorCache::write(path, recs);
        VectorCache cache = VectorCache::load(path);
        CHECK(cache.size() == 3);
        for (const auto& r : recs) {
            const auto& got = cache.find(r.key, r.kind);
            REQUIRE(got.size() == r.values.size());
            for (Eigen::Index j = 0; j < got.size(); ++j) {
                CHECK(std::memcmp(&got[j], &r.values[j], sizeof(float)) == 0);
            }
        }
        CHECK_THROWS_AS(cache.find("missing", Kind::Preference), Error);
    }
    SUBCASE("mixed dims rejected") {
        Eigen::VectorXf a(8), b(16);
        a.setZero();
        b.setZero();
        CHECK_THROWS_AS(
            VectorCache::write(path, {{"a", Kind::Preference, a}, {"b", Kind::Preference, b}}),
            Error);
    }
    SUBCASE("duplicate key overwrites with the last value") {
        Eigen::VectorXf a(2), b(2);
        a << 1.f, 1.f;
        b << 2.f, 2.f;
        VectorCache::write(path, {{"k", Kind::Preference, a}, {"k", Kind::Preference, b}});
        VectorCache cache = VectorCache::load(path);
        CHECK(cache.size() == 1);
        CHECK(cache.find("k", Kind::Preference)(0) == 2.f);
    }
    SUBCASE("file size matches the documented formula exactly") {
        std::vector<VectorRecord> recs;
        for (int i = 0; i < 7; ++i) {
            Eigen::VectorXf v(32);
            v.setConstant(static_cast<float>(i));
            recs.push_back({"entity-" + std::to_string(i * 11), Kind::ItemFactual, v});
        }
        VectorCache::write(path, recs);
        CHECK(std::filesystem::file_size(path) == VectorCache::expected_file_size(32, recs));
    }
    SUBCASE("round trip preserves subnormals, signed zero, and random bit patterns") {
        Rng bits(9);
        std::vector<VectorRecord> recs;
        Eigen::VectorXf v(64);
        v(0) = 0.0f;
        v(1) = -0.0f;
        v(2) = std::numeric_limits<float>::denorm_min();
        v(3) = -std::numeric_limits<float>::denorm_min();
        v(4) = std::numeric_limits<float>::min() / 2.0f;  // subnormal
        for (int j = 5; j < 64; ++j) {
            float f;
            do {
                const auto u = static_cast<std::uint32_t>(bits.uniform_int(0, 0xffffffffLL));
                std::memcpy(&f, &u, 4);
            } while (!std::isfinite(f));
            v(j) = f;
        }
        VectorCache::write(path, {{"bits", Kind::Preference, v}});
        VectorCache cache = VectorCache::load(path);
        const auto& got = cache.find("bits", Kind::Preference);
        for (Eigen::Index j = 0; j < 64; ++j)
            CHECK(std::memcmp(&got[j], &v[j], 4) == 0);
    }
    SUBCASE("augmented cache is ~m/q times smaller for the same entities") {
        const int m = 64, q = 32;
        std::vector<VectorRecord> reps, augs;
        for (int i = 0; i < 200; ++i) {
            Eigen::VectorXf r(m), a(q);
            r.setZero();
            a.setZero();
            const std::string key = "e" + std::to_string(i);
            reps.push_back({key, Kind::Preference, r});
            augs.push_back({key, Kind::Preference, a});
        }
        const auto rep_path = temp_path("kar_cache_m.karv");
        const auto aug_path = temp_path("kar_cache_q.karv");
        VectorCache::write(rep_path, reps);
        VectorCache::write(aug_path, augs);
        const double ratio = static_cast<double>(std::filesystem::file_size(rep_path)) /
                             static_cast<double>(std::filesystem::file_size(aug_path));
        CHECK(ratio > 1.7);  // m/q = 2 modulo shared header and index bytes
        CHECK(ratio <= 2.0);
        std::filesystem::remove(rep_path);
        std::filesystem::remove(aug_path);
    }
    std::filesystem::remove(path);
}
