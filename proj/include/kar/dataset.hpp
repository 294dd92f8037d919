#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace kar::data {

struct RawInteraction {
    std::string user_id;
    std::string item_id;
    int rating = 0;              // 1..5
    std::int64_t timestamp = 0;  // seconds, non-negative
};

struct UserInfo {
    std::string gender;
    std::string age;         // raw code, e.g. "25"
    std::string occupation;  // raw code, e.g. "20"
};

struct MovieInfo {
    std::string title;
    std::string genres;  // pipe-joined, used as one categorical value
};

struct MovieLensRaw {
    std::vector<RawInteraction> interactions;
    std::map<std::string, UserInfo> users;
    std::map<std::string, MovieInfo> movies;

    const UserInfo& user(const std::string& id) const;
    MovieInfo movie_or_placeholder(const std::string& id) const;
};

// "::"-delimited MovieLens-1M record parsers. A malformed line is a data
// error naming the 1-based line number.
std::vector<RawInteraction> parse_interactions(const std::string& path);
std::map<std::string, UserInfo> parse_users(const std::string& path);
std::map<std::string, MovieInfo> parse_movies(const std::string& path);
// Expects ratings.dat, users.dat, movies.dat under dir.
MovieLensRaw load_movielens_dir(const std::string& dir);

// 1 iff rating >= 4; rating outside [1,5] is a data error.
int binarize_rating(int rating);

// Human-readable profile pieces for prompt construction. Unknown codes fall
// back to the raw string.
std::string describe_gender(const std::string& code);
std::string describe_age(const std::string& code);
std::string describe_occupation(const std::string& code);
std::vector<std::string> profile_strings(const UserInfo& u);

// Single-field vocabulary; index 0 is reserved for out-of-vocabulary.
class Vocab {
public:
    std::int32_t add(const std::string& v);
    std::int32_t lookup(const std::string& v) const;  // 0 when unseen
    std::int32_t size() const { return static_cast<std::int32_t>(values_.size()) + 1; }

private:
    std::unordered_map<std::string, std::int32_t> index_;
    std::vector<std::string> values_;
};

// Categorical field layout shared by samples and backbones.
enum Field : int {
    kUserId = 0,
    kGender,
    kAge,
    kOccupation,
    kMovieId,
    kCategory,
    kNumFields,
};
extern const std::array<const char*, kNumFields> kFieldNames;

struct FeatureVocabulary {
    std::array<Vocab, kNumFields> fields;
    static constexpr std::int32_t kRatingVocabSize = 6;  // indices 1..5; 0 unused
};

struct UserSplit {
    std::vector<std::string> train_users;
    std::vector<std::string> test_users;
};

// Deterministic user-disjoint partition; train share = round(ratio * users),
// clamped so both sides stay non-empty.
UserSplit split_by_user(const std::vector<RawInteraction>& interactions,
                        double split_ratio, std::uint64_t seed);

struct HistItem {
    std::int32_t movie = 0;
    std::int32_t category = 0;
    std::int32_t rating = 0;  // raw 1..5
};

struct Sample {
    std::array<std::int32_t, kNumFields> fields{};
    std::vector<HistItem> history;  // chronological, oldest first
    std::int32_t label = 0;
    std::int32_t user_ref = 0;  // index into SampleSet::user_ids
    std::int32_t item_ref = 0;  // index into SampleSet::item_ids
};

struct SampleSet {
    std::int32_t max_history = 0;
    std::array<std::int32_t, kNumFields> vocab_sizes{};
    std::int32_t rating_vocab_size = FeatureVocabulary::kRatingVocabSize;
    std::vector<std::string> user_ids;  // raw entity ids referenced by samples
    std::vector<std::string> item_ids;
    std::vector<Sample> train;
    std::vector<Sample> test;

    void save(const std::string& path) const;
    static SampleSet load(const std::string& path);
};

struct BuildResult {
    SampleSet samples;
    FeatureVocabulary vocab;  // built from the training split only
};

// One sample per interaction; history is the user's own prior interactions,
// most recent max_history of them, ties broken by file order.
BuildResult build_samples(const MovieLensRaw& raw, const UserSplit& split,
                          std::int32_t max_history);

}  // namespace kar::data
