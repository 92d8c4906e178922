#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace utilimax {

struct RatingEvent {
    std::int64_t user_id = 0;
    std::int64_t movie_id = 0;
    int rating = 0;
    std::int64_t timestamp = 0;

    bool operator==(const RatingEvent&) const = default;
};

struct MovieRecord {
    std::int64_t movie_id = 0;
    std::string title;
    std::vector<std::string> genres;

    bool has_genre(std::string_view g) const;
    bool operator==(const MovieRecord&) const = default;
};

/// movies.dat in the 1M release is Latin-1; ratings.dat is plain ASCII.
enum class TextEncoding { Latin1, Utf8 };

std::string latin1_to_utf8(std::string_view bytes);

/// "UserID::MovieID::Rating::Timestamp" rows. Malformed rows (including a
/// rating outside 1..5) throw Error(Data) naming `source` and the line.
std::vector<RatingEvent> parse_ratings(std::string_view text, const std::string& source = "ratings.dat");
std::vector<RatingEvent> load_ratings(const std::filesystem::path& path);

/// "MovieID::Title::Genre|Genre" rows.
std::vector<MovieRecord> parse_movies(std::string_view text, TextEncoding encoding = TextEncoding::Latin1,
                                      const std::string& source = "movies.dat");
std::vector<MovieRecord> load_movies(const std::filesystem::path& path,
                                     TextEncoding encoding = TextEncoding::Latin1);

struct EligibilityCriteria {
    std::size_t min_history = 150;
    std::size_t min_positive_in_window = 5;
    std::size_t train_size = 100;
    std::size_t candidate_size = 50;
    int min_positive_rating = 4;
    std::vector<std::string> required_genres{"Comedy", "Romance"};

    /// Throws Error(Config) unless min_history >= train_size + candidate_size.
    void validate() const;
};

/// Rating >= threshold and every required genre present (extra genres allowed).
bool is_positive_match(int rating, const MovieRecord* movie, const EligibilityCriteria& c);

struct TrainItem {
    std::int64_t movie_id = 0;
    std::string title;
    int rating = 0;
};

struct CandidateItem {
    std::int64_t movie_id = 0;
    std::string title;
    int rating = 0;  // ground truth, never shown to the model
};

struct UserTask {
    std::int64_t user_id = 0;
    std::vector<TrainItem> train;
    std::vector<CandidateItem> candidates;
    std::set<std::int64_t> relevant;
};

/// Ratings and movies indexed for the harness: per-user histories sorted by
/// timestamp (ties by movie id).
class RatingsIndex {
public:
    RatingsIndex(const std::vector<RatingEvent>& ratings, const std::vector<MovieRecord>& movies);

    const std::vector<RatingEvent>& history(std::int64_t user_id) const;
    const MovieRecord* movie(std::int64_t movie_id) const;
    std::vector<std::int64_t> users() const;

private:
    std::map<std::int64_t, std::vector<RatingEvent>> histories_;
    std::map<std::int64_t, MovieRecord> movies_;
};

/// Users whose history is long enough and whose candidate window holds enough
/// positive matches, sampled without replacement from the given seed.
/// The result is in sampled order. Throws Error(Data) when too few qualify.
std::vector<std::int64_t> select_eligible_users(const RatingsIndex& index, const EligibilityCriteria& c,
                                                std::size_t sample_size, std::uint64_t seed);

/// All users passing the filters, ascending.
std::vector<std::int64_t> eligible_users(const RatingsIndex& index, const EligibilityCriteria& c);

UserTask build_user_task(std::int64_t user_id, const RatingsIndex& index, const EligibilityCriteria& c);

}  // namespace utilimax
