#include "utilimax/movielens.hpp"

#include "json_util.hpp"
#include "utilimax/error.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <random>

namespace utilimax {

bool MovieRecord::has_genre(std::string_view g) const {
    return std::find(genres.begin(), genres.end(), g) != genres.end();
}

std::string latin1_to_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find("::", start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 2;
    }
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (!line.empty()) fn(line, line_no);
        start = end + 1;
    }
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

Error row_error(const std::string& source, std::size_t line, const std::string& what) {
    return Error(ErrorCode::Data, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<RatingEvent> parse_ratings(std::string_view text, const std::string& source) {
    std::vector<RatingEvent> out;
    for_each_line(text, [&](std::string_view line, std::size_t no) {
        const auto f = split_fields(line);
        if (f.size() != 4) throw row_error(source, no, "expected 4 '::'-separated fields");
        RatingEvent r;
        std::int64_t rating = 0;
        if (!parse_int(f[0], r.user_id) || !parse_int(f[1], r.movie_id) || !parse_int(f[2], rating) ||
            !parse_int(f[3], r.timestamp)) {
            throw row_error(source, no, "non-integer field");
        }
        if (rating < 1 || rating > 5) {
            throw row_error(source, no, "rating out of range: " + std::to_string(rating));
        }
        r.rating = static_cast<int>(rating);
        out.push_back(r);
    });
    return out;
}

std::vector<RatingEvent> load_ratings(const std::filesystem::path& path) {
    return parse_ratings(detail::read_text_file(path), path.filename().string());
}

std::vector<MovieRecord> parse_movies(std::string_view text, TextEncoding encoding,
                                      const std::string& source) {
    std::vector<MovieRecord> out;
    for_each_line(text, [&](std::string_view line, std::size_t no) {
        // First and last separators, so a title containing "::" still parses.
        const auto first = line.find("::");
        const auto last = line.rfind("::");
        if (first == std::string_view::npos || first == last) {
            throw row_error(source, no, "expected 3 '::'-separated fields");
        }
        MovieRecord m;
        if (!parse_int(line.substr(0, first), m.movie_id)) throw row_error(source, no, "non-integer movie id");
        const auto title = line.substr(first + 2, last - first - 2);
        m.title = encoding == TextEncoding::Latin1 ? latin1_to_utf8(title) : std::string(title);
        auto genres = line.substr(last + 2);
        std::size_t start = 0;
        while (start <= genres.size()) {
            auto bar = genres.find('|', start);
            if (bar == std::string_view::npos) bar = genres.size();
            if (bar > start) m.genres.emplace_back(genres.substr(start, bar - start));
            start = bar + 1;
        }
        if (m.genres.empty()) throw row_error(source, no, "movie has no genres");
        out.push_back(std::move(m));
    });
    return out;
}

std::vector<MovieRecord> load_movies(const std::filesystem::path& path, TextEncoding encoding) {
    return parse_movies(detail::read_text_file(path), encoding, path.filename().string());
}

// ---------------------------------------------------------------------------

void EligibilityCriteria::validate() const {
    if (train_size == 0 || candidate_size == 0) {
        throw Error(ErrorCode::Config, "eligibility: train_size and candidate_size must be positive");
    }
    if (min_history < train_size + candidate_size) {
        throw Error(ErrorCode::Config, "eligibility: min_history must be >= train_size + candidate_size");
    }
}

bool is_positive_match(int rating, const MovieRecord* movie, const EligibilityCriteria& c) {
    if (rating < c.min_positive_rating || !movie) return false;
    return std::all_of(c.required_genres.begin(), c.required_genres.end(),
                       [&](const std::string& g) { return movie->has_genre(g); });
}

RatingsIndex::RatingsIndex(const std::vector<RatingEvent>& ratings, const std::vector<MovieRecord>& movies) {
    for (const auto& m : movies) movies_[m.movie_id] = m;
    for (const auto& r : ratings) histories_[r.user_id].push_back(r);
    for (auto& [user, h] : histories_) {
        std::sort(h.begin(), h.end(), [](const RatingEvent& a, const RatingEvent& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            return a.movie_id < b.movie_id;
        });
    }
}

const std::vector<RatingEvent>& RatingsIndex::history(std::int64_t user_id) const {
    static const std::vector<RatingEvent> empty;
    auto it = histories_.find(user_id);
    return it == histories_.end() ? empty : it->second;
}

const MovieRecord* RatingsIndex::movie(std::int64_t movie_id) const {
    auto it = movies_.find(movie_id);
    return it == movies_.end() ? nullptr : &it->second;
}

std::vector<std::int64_t> RatingsIndex::users() const {
    std::vector<std::int64_t> out;
    for (const auto& [user, h] : histories_) out.push_back(user);
    return out;
}

std::vector<std::int64_t> eligible_users(const RatingsIndex& index, const EligibilityCriteria& c) {
    c.validate();
    std::vector<std::int64_t> out;
    for (auto user : index.users()) {
        const auto& h = index.history(user);
        if (h.size() < c.min_history) continue;
        std::size_t positives = 0;
        for (std::size_t i = c.train_size; i < c.train_size + c.candidate_size; ++i) {
            if (is_positive_match(h[i].rating, index.movie(h[i].movie_id), c)) ++positives;
        }
        if (positives >= c.min_positive_in_window) out.push_back(user);
    }
    return out;
}

std::vector<std::int64_t> select_eligible_users(const RatingsIndex& index, const EligibilityCriteria& c,
                                                std::size_t sample_size, std::uint64_t seed) {
    auto pool = eligible_users(index, c);
    if (pool.size() < sample_size) {
        throw Error(ErrorCode::Data, "only " + std::to_string(pool.size()) + " eligible users, " +
                                         std::to_string(sample_size) + " requested");
    }
    // Partial Fisher-Yates. mt19937_64 output is fixed by the standard, but
    // std::uniform_int_distribution is not, so bound the draws by rejection.
    std::mt19937_64 rng(seed);
    auto below = [&rng](std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = rng();
        } while (x >= limit);
        return x % n;
    };
    for (std::size_t i = 0; i < sample_size; ++i) {
        const auto j = i + static_cast<std::size_t>(below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(sample_size);
    return pool;
}

UserTask build_user_task(std::int64_t user_id, const RatingsIndex& index, const EligibilityCriteria& c) {
    c.validate();
    const auto& h = index.history(user_id);
    if (h.size() < c.train_size + c.candidate_size) {
        throw Error(ErrorCode::Data, "insufficient history for user " + std::to_string(user_id) + ": " +
                                         std::to_string(h.size()) + " ratings");
    }
    UserTask t;
    t.user_id = user_id;
    auto title_of = [&](std::int64_t movie_id) {
        const auto* m = index.movie(movie_id);
        return m ? m->title : "movie " + std::to_string(movie_id);
    };
    for (std::size_t i = 0; i < c.train_size; ++i) {
        t.train.push_back({h[i].movie_id, title_of(h[i].movie_id), h[i].rating});
    }
    for (std::size_t i = c.train_size; i < c.train_size + c.candidate_size; ++i) {
        t.candidates.push_back({h[i].movie_id, title_of(h[i].movie_id), h[i].rating});
        if (is_positive_match(h[i].rating, index.movie(h[i].movie_id), c)) t.relevant.insert(h[i].movie_id);
    }
    return t;
}

}  // namespace utilimax
