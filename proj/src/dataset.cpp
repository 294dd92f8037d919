#include "kar/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "kar/error.hpp"
#include "kar/io.hpp"
#include "kar/rng.hpp"

namespace kar::data {

const std::array<const char*, kNumFields> kFieldNames = {
    "user_id", "gender", "age", "occupation", "movie_id", "category"};

namespace {

std::vector<std::string> split_on(const std::string& line, const std::string& delim) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(delim, pos);
        if (next == std::string::npos) {
            parts.push_back(line.substr(pos));
            break;
        }
        parts.push_back(line.substr(pos, next - pos));
        pos = next + delim.size();
    }
    return parts;
}

std::int64_t parse_int_field(const std::string& s, const char* what,
                             const std::string& path, std::size_t line_no) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail_data(path + ":" + std::to_string(line_no) + ": non-integer " +
                  what + " field '" + s + "'");
    return v;
}

std::ifstream open_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_data("cannot open for reading: " + path);
    return is;
}

}  // namespace

const UserInfo& MovieLensRaw::user(const std::string& id) const {
    static const UserInfo kUnknown{};
    auto it = users.find(id);
    return it == users.end() ? kUnknown : it->second;
}

MovieInfo MovieLensRaw::movie_or_placeholder(const std::string& id) const {
    auto it = movies.find(id);
    if (it != movies.end()) return it->second;
    return MovieInfo{"item " + id, "unknown"};
}

std::vector<RawInteraction> parse_interactions(const std::string& path) {
    auto is = open_text(path);
    std::vector<RawInteraction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto parts = split_on(line, "::");
        if (parts.size() != 4)
            fail_data(path + ":" + std::to_string(line_no) +
                      ": expected UserID::MovieID::Rating::Timestamp");
        RawInteraction r;
        r.user_id = parts[0];
        r.item_id = parts[1];
        r.rating = static_cast<int>(parse_int_field(parts[2], "rating", path, line_no));
        r.timestamp = parse_int_field(parts[3], "timestamp", path, line_no);
        if (r.rating < 1 || r.rating > 5)
            fail_data(path + ":" + std::to_string(line_no) + ": rating " +
                      std::to_string(r.rating) + " outside [1,5]");
        if (r.timestamp < 0)
            fail_data(path + ":" + std::to_string(line_no) + ": negative timestamp");
        out.push_back(std::move(r));
    }
    return out;
}

std::map<std::string, UserInfo> parse_users(const std::string& path) {
    auto is = open_text(path);
    std::map<std::string, UserInfo> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.back() == '\r') line.pop_back();
        auto parts = split_on(line, "::");
        if (parts.size() < 4)
            fail_data(path + ":" + std::to_string(line_no) +
                      ": expected UserID::Gender::Age::Occupation::Zip");
        out[parts[0]] = UserInfo{parts[1], parts[2], parts[3]};
    }
    return out;
}

std::map<std::string, MovieInfo> parse_movies(const std::string& path) {
    auto is = open_text(path);
    std::map<std::string, MovieInfo> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.back() == '\r') line.pop_back();
        auto parts = split_on(line, "::");
        if (parts.size() < 3)
            fail_data(path + ":" + std::to_string(line_no) +
                      ": expected MovieID::Title::Genres");
        // Middle parts rejoin in case a title itself contains "::".
        std::string title = parts[1];
        for (std::size_t i = 2; i + 1 < parts.size(); ++i) title += "::" + parts[i];
        out[parts[0]] = MovieInfo{std::move(title), parts.back()};
    }
    return out;
}

MovieLensRaw load_movielens_dir(const std::string& dir) {
    MovieLensRaw raw;
    raw.interactions = parse_interactions(dir + "/ratings.dat");
    raw.users = parse_users(dir + "/users.dat");
    raw.movies = parse_movies(dir + "/movies.dat");
    return raw;
}

int binarize_rating(int rating) {
    if (rating < 1 || rating > 5)
        fail_data("rating " + std::to_string(rating) + " outside [1,5]");
    return rating >= 4 ? 1 : 0;
}

std::string describe_gender(const std::string& code) {
    if (code == "F") return "female";
    if (code == "M") return "male";
    return code;
}

std::string describe_age(const std::string& code) {
    static const std::map<std::string, std::string> table = {
        {"1", "under 18"}, {"18", "18-24"}, {"25", "25-34"}, {"35", "35-44"},
        {"45", "45-49"},   {"50", "50-55"}, {"56", "56+"},
    };
    auto it = table.find(code);
    return it == table.end() ? code : it->second;
}

std::string describe_occupation(const std::string& code) {
    static const std::map<std::string, std::string> table = {
        {"0", "other"},
        {"1", "academic/educator"},
        {"2", "artist"},
        {"3", "clerical/admin"},
        {"4", "college/grad student"},
        {"5", "customer service"},
        {"6", "doctor/health care"},
        {"7", "executive/managerial"},
        {"8", "farmer"},
        {"9", "homemaker"},
        {"10", "K-12 student"},
        {"11", "lawyer"},
        {"12", "programmer"},
        {"13", "retired"},
        {"14", "sales/marketing"},
        {"15", "scientist"},
        {"16", "self-employed"},
        {"17", "technician/engineer"},
        {"18", "tradesman/craftsman"},
        {"19", "unemployed"},
        {"20", "writer"},
    };
    auto it = table.find(code);
    return it == table.end() ? code : it->second;
}

std::vector<std::string> profile_strings(const UserInfo& u) {
    return {
        "gender: " + describe_gender(u.gender),
        "age group: " + describe_age(u.age),
        "occupation: " + describe_occupation(u.occupation),
    };
}

std::int32_t Vocab::add(const std::string& v) {
    auto it = index_.find(v);
    if (it != index_.end()) return it->second;
    values_.push_back(v);
    const auto idx = static_cast<std::int32_t>(values_.size());  // 0 stays OOV
    index_.emplace(v, idx);
    return idx;
}

std::int32_t Vocab::lookup(const std::string& v) const {
    auto it = index_.find(v);
    return it == index_.end() ? 0 : it->second;
}

UserSplit split_by_user(const std::vector<RawInteraction>& interactions,
                        double split_ratio, std::uint64_t seed) {
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        fail_config("split_ratio must be in (0,1), got " + std::to_string(split_ratio));
    std::set<std::string> seen;
    for (const auto& r : interactions) seen.insert(r.user_id);
    if (seen.size() < 2)
        fail_data("split_by_user needs at least 2 users, got " + std::to_string(seen.size()));

    std::vector<std::string> users(seen.begin(), seen.end());
    Rng rng(derive_seed(seed, "user-split"));
    rng.shuffle(users);

    auto n_train = static_cast<std::size_t>(
        std::llround(split_ratio * static_cast<double>(users.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, users.size() - 1);

    UserSplit split;
    split.train_users.assign(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_users.assign(users.begin() + static_cast<std::ptrdiff_t>(n_train), users.end());
    std::sort(split.train_users.begin(), split.train_users.end());
    std::sort(split.test_users.begin(), split.test_users.end());
    return split;
}

namespace {

struct Indexed {
    const RawInteraction* r;
    std::size_t file_order;
};

// Per-user interactions sorted by timestamp, file order breaking ties.
std::map<std::string, std::vector<Indexed>> group_by_user(const MovieLensRaw& raw) {
    std::map<std::string, std::vector<Indexed>> by_user;
    for (std::size_t i = 0; i < raw.interactions.size(); ++i)
        by_user[raw.interactions[i].user_id].push_back({&raw.interactions[i], i});
    for (auto& [_, v] : by_user)
        std::sort(v.begin(), v.end(), [](const Indexed& a, const Indexed& b) {
            if (a.r->timestamp != b.r->timestamp) return a.r->timestamp < b.r->timestamp;
            return a.file_order < b.file_order;
        });
    return by_user;
}

}  // namespace

BuildResult build_samples(const MovieLensRaw& raw, const UserSplit& split,
                          std::int32_t max_history) {
    if (max_history < 0) fail_config("max_history must be >= 0");
    BuildResult out;
    auto by_user = group_by_user(raw);

    FeatureVocabulary& vocab = out.vocab;
    for (const auto& uid : split.train_users) {
        auto it = by_user.find(uid);
        if (it == by_user.end()) continue;
        const UserInfo& u = raw.user(uid);
        vocab.fields[kUserId].add(uid);
        vocab.fields[kGender].add(u.gender);
        vocab.fields[kAge].add(u.age);
        vocab.fields[kOccupation].add(u.occupation);
        for (const Indexed& ix : it->second) {
            const MovieInfo m = raw.movie_or_placeholder(ix.r->item_id);
            vocab.fields[kMovieId].add(ix.r->item_id);
            vocab.fields[kCategory].add(m.genres);
        }
    }

    SampleSet& set = out.samples;
    set.max_history = max_history;
    for (int f = 0; f < kNumFields; ++f) set.vocab_sizes[f] = vocab.fields[f].size();

    std::unordered_map<std::string, std::int32_t> user_refs, item_refs;
    auto ref_of = [](std::unordered_map<std::string, std::int32_t>& refs,
                     std::vector<std::string>& table, const std::string& id) {
        auto it = refs.find(id);
        if (it != refs.end()) return it->second;
        table.push_back(id);
        const auto r = static_cast<std::int32_t>(table.size() - 1);
        refs.emplace(id, r);
        return r;
    };

    auto emit_user = [&](const std::string& uid, std::vector<Sample>& dest) {
        auto it = by_user.find(uid);
        if (it == by_user.end()) return;
        const UserInfo& u = raw.user(uid);
        const auto& seq = it->second;
        for (std::size_t k = 0; k < seq.size(); ++k) {
            const RawInteraction& r = *seq[k].r;
            const MovieInfo m = raw.movie_or_placeholder(r.item_id);
            Sample s;
            s.fields[kUserId] = vocab.fields[kUserId].lookup(uid);
            s.fields[kGender] = vocab.fields[kGender].lookup(u.gender);
            s.fields[kAge] = vocab.fields[kAge].lookup(u.age);
            s.fields[kOccupation] = vocab.fields[kOccupation].lookup(u.occupation);
            s.fields[kMovieId] = vocab.fields[kMovieId].lookup(r.item_id);
            s.fields[kCategory] = vocab.fields[kCategory].lookup(m.genres);
            s.label = binarize_rating(r.rating);
            s.user_ref = ref_of(user_refs, set.user_ids, uid);
            s.item_ref = ref_of(item_refs, set.item_ids, r.item_id);
            const std::size_t take = std::min<std::size_t>(k, static_cast<std::size_t>(max_history));
            s.history.reserve(take);
            for (std::size_t j = k - take; j < k; ++j) {
                const RawInteraction& h = *seq[j].r;
                const MovieInfo hm = raw.movie_or_placeholder(h.item_id);
                s.history.push_back(HistItem{
                    vocab.fields[kMovieId].lookup(h.item_id),
                    vocab.fields[kCategory].lookup(hm.genres),
                    h.rating,
                });
            }
            dest.push_back(std::move(s));
        }
    };

    for (const auto& uid : split.train_users) emit_user(uid, set.train);
    for (const auto& uid : split.test_users) emit_user(uid, set.test);
    return out;
}

namespace {
constexpr char kSampleMagic[4] = {'K', 'A', 'R', 'S'};
constexpr std::uint16_t kSampleVersion = 1;

void write_samples(std::ostream& os, const std::vector<Sample>& samples,
                   std::int32_t max_history) {
    for (const Sample& s : samples) {
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.label));
        for (int f = 0; f < kNumFields; ++f)
            io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.fields[f]));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.user_ref));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.item_ref));
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.history.size()));
        for (std::int32_t j = 0; j < max_history; ++j) {
            HistItem h;
            if (j < static_cast<std::int32_t>(s.history.size())) h = s.history[static_cast<std::size_t>(j)];
            io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.movie));
            io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.category));
            io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.rating));
        }
    }
}

std::vector<Sample> read_samples(std::istream& is, std::uint64_t count,
                                 std::int32_t max_history) {
    std::vector<Sample> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Sample s;
        s.label = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
        for (int f = 0; f < kNumFields; ++f)
            s.fields[f] = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
        s.user_ref = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
        s.item_ref = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
        const auto len = io::read_le<std::uint32_t>(is);
        if (len > static_cast<std::uint32_t>(max_history))
            fail_data("sample file: history length exceeds max_history");
        s.history.resize(len);
        for (std::int32_t j = 0; j < max_history; ++j) {
            HistItem h;
            h.movie = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
            h.category = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
            h.rating = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
            if (j < static_cast<std::int32_t>(len)) s.history[static_cast<std::size_t>(j)] = h;
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_table(std::ostream& os, const std::vector<std::string>& table) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(table.size()));
    for (const auto& s : table) io::write_string(os, s);
}

std::vector<std::string> read_table(std::istream& is) {
    const auto n = io::read_le<std::uint32_t>(is);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(io::read_string(is));
    return out;
}

}  // namespace

void SampleSet::save(const std::string& path) const {
    auto os = io::open_out(path);
    io::write_bytes(os, kSampleMagic, 4);
    io::write_le<std::uint16_t>(os, kSampleVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(kNumFields));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(max_history));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(kNumFields) + 1);
    for (int f = 0; f < kNumFields; ++f)
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(vocab_sizes[f]));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(rating_vocab_size));
    io::write_le<std::uint64_t>(os, train.size());
    io::write_le<std::uint64_t>(os, test.size());
    write_table(os, user_ids);
    write_table(os, item_ids);
    write_samples(os, train, max_history);
    write_samples(os, test, max_history);
}

SampleSet SampleSet::load(const std::string& path) {
    auto is = io::open_in(path);
    char magic[4];
    io::read_bytes(is, magic, 4);
    if (std::memcmp(magic, kSampleMagic, 4) != 0)
        fail_data("not a sample file: " + path);
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kSampleVersion)
        fail_data("unsupported sample file version " + std::to_string(version));
    const auto f = io::read_le<std::uint32_t>(is);
    if (f != kNumFields)
        fail_data("sample file has " + std::to_string(f) + " fields, expected " +
                  std::to_string(int(kNumFields)));
    SampleSet set;
    set.max_history = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
    const auto n_vocabs = io::read_le<std::uint32_t>(is);
    if (n_vocabs != kNumFields + 1) fail_data("sample file: unexpected vocab count");
    for (int i = 0; i < kNumFields; ++i)
        set.vocab_sizes[i] = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
    set.rating_vocab_size = static_cast<std::int32_t>(io::read_le<std::uint32_t>(is));
    const auto n_train = io::read_le<std::uint64_t>(is);
    const auto n_test = io::read_le<std::uint64_t>(is);
    set.user_ids = read_table(is);
    set.item_ids = read_table(is);
    set.train = read_samples(is, n_train, set.max_history);
    set.test = read_samples(is, n_test, set.max_history);
    return set;
}

}  // namespace kar::data
