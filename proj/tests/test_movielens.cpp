#include "synthetic_ratings.hpp"
#include "utilimax/error.hpp"
#include "utilimax/movielens.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>

using namespace utilimax;
using test_support::make_synthetic_ratings;

namespace {

std::string data_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Data);
        return e.what();
    }
    ADD_FAILURE() << "no error thrown";
    return {};
}

}  // namespace

TEST(MovieLensParse, Rows) {
    const auto r = parse_ratings("1::1193::5::978300760\n");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0], (RatingEvent{1, 1193, 5, 978300760}));

    const auto m = parse_movies("1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n");
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].title, "One Flew Over the Cuckoo's Nest (1975)");
    EXPECT_EQ(m[0].genres, (std::vector<std::string>{"Drama"}));
    EXPECT_TRUE(m[0].has_genre("Drama"));
    EXPECT_FALSE(m[0].has_genre("Comedy"));
}

TEST(MovieLensParse, MalformedRowsReportLine) {
    EXPECT_EQ(data_error([] { parse_ratings("1::2::5::10\n1::3::6::11\n"); }),
              "ratings.dat:2: rating out of range: 6");
    EXPECT_NE(data_error([] { parse_ratings("1::2::5\n"); }).find("ratings.dat:1:"), std::string::npos);
    EXPECT_NE(data_error([] { parse_ratings("1::x::5::10\n"); }).find("non-integer"), std::string::npos);
    EXPECT_NE(data_error([] { parse_movies("5::Title::\n"); }).find("movies.dat:1:"), std::string::npos);
}

TEST(MovieLensParse, WindowsLineEndingsAndBlankTail) {
    const auto r = parse_ratings("1::2::5::10\r\n1::3::4::11\r\n\n");
    EXPECT_EQ(r.size(), 2u);
}

TEST(MovieLensEncoding, Latin1IsTranscoded) {
    EXPECT_EQ(latin1_to_utf8("Am\xE9lie"), "Am\xC3\xA9lie");
    const auto m = parse_movies("6::Caf\xE9 Society (1995)::Comedy|Romance\n", TextEncoding::Latin1);
    EXPECT_EQ(m[0].title, "Caf\xC3\xA9 Society (1995)");
    const auto u = parse_movies("6::Caf\xC3\xA9 Society (1995)::Comedy\n", TextEncoding::Utf8);
    EXPECT_EQ(u[0].title, "Caf\xC3\xA9 Society (1995)");
}

TEST(MovieLensLoad, MissingFile) {
    try {
        load_ratings("/nonexistent/ratings.dat");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
}

TEST(MovieLensEligibility, Thresholds) {
    const auto data = make_synthetic_ratings({{1, 149, 10}, {2, 200, 4}, {3, 150, 5}, {4, 180, 12}, {5, 150, 0}});
    const RatingsIndex index(data.ratings, data.movies);
    EXPECT_EQ(eligible_users(index, EligibilityCriteria{}), (std::vector<std::int64_t>{3, 4}));
}

TEST(MovieLensEligibility, PositiveMatchRule) {
    const EligibilityCriteria c;
    const MovieRecord both{1, "t", {"Comedy", "Romance", "Drama"}};
    const MovieRecord comedy{2, "t", {"Comedy"}};
    EXPECT_TRUE(is_positive_match(5, &both, c));
    EXPECT_TRUE(is_positive_match(4, &both, c));
    EXPECT_FALSE(is_positive_match(3, &both, c));
    EXPECT_FALSE(is_positive_match(5, &comedy, c));
    EXPECT_FALSE(is_positive_match(5, nullptr, c));
}

TEST(MovieLensEligibility, SamplingIsDeterministic) {
    std::vector<test_support::SyntheticUser> users;
    for (int u = 1; u <= 30; ++u) users.push_back({u, 150 + u, 5 + u % 7});
    const auto data = make_synthetic_ratings(users);
    const RatingsIndex index(data.ratings, data.movies);
    const auto a = select_eligible_users(index, EligibilityCriteria{}, 20, 42);
    EXPECT_EQ(a, select_eligible_users(index, EligibilityCriteria{}, 20, 42));
    EXPECT_EQ(a.size(), 20u);
    EXPECT_EQ(std::set<std::int64_t>(a.begin(), a.end()).size(), 20u);
    EXPECT_NE(a, select_eligible_users(index, EligibilityCriteria{}, 20, 43));
    EXPECT_NE(data_error([&] { select_eligible_users(index, EligibilityCriteria{}, 31, 1); }).find("eligible users"),
              std::string::npos);
}

TEST(MovieLensEligibility, CriteriaValidation) {
    EligibilityCriteria c;
    c.min_history = 149;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_NO_THROW(EligibilityCriteria{}.validate());
}

TEST(MovieLensTask, SplitAndRelevance) {
    const auto data = make_synthetic_ratings({{7, 170, 6}});
    const RatingsIndex index(data.ratings, data.movies);
    const auto task = build_user_task(7, index, EligibilityCriteria{});
    EXPECT_EQ(task.train.size(), 100u);
    ASSERT_EQ(task.candidates.size(), 50u);
    std::set<std::int64_t> train_ids;
    for (const auto& t : task.train) train_ids.insert(t.movie_id);
    for (const auto& c : task.candidates) EXPECT_FALSE(train_ids.count(c.movie_id));
    EXPECT_EQ(task.relevant.size(), 6u);
    for (auto id : task.relevant) {
        EXPECT_TRUE(std::any_of(task.candidates.begin(), task.candidates.end(),
                                [&](const CandidateItem& c) { return c.movie_id == id; }));
    }
    EXPECT_THROW(build_user_task(7, RatingsIndex(std::vector<RatingEvent>(data.ratings.begin(), data.ratings.begin() + 10),
                                                 data.movies),
                                 EligibilityCriteria{}),
                 Error);
}

TEST(MovieLensTask, TimestampTiesBreakByMovieId) {
    const std::vector<RatingEvent> ratings{{1, 30, 5, 100}, {1, 10, 4, 100}, {1, 20, 3, 50}};
    const std::vector<MovieRecord> movies{{10, "a", {"Drama"}}, {20, "b", {"Drama"}}, {30, "c", {"Drama"}}};
    const RatingsIndex index(ratings, movies);
    const auto& h = index.history(1);
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h[0].movie_id, 20);
    EXPECT_EQ(h[1].movie_id, 10);
    EXPECT_EQ(h[2].movie_id, 30);
}
