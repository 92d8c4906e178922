#include "test_support.hpp"
#include "utilimax/experiment.hpp"
#include "utilimax/response.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace utilimax;

namespace {

std::string block(const std::string& body) { return "Reasoning first.\n\n```utilimax-json\n" + body + "\n```\n"; }

// Three candidates; m1 recomputes to 4.2*0.9*0.7 = 2.646.
std::string three_candidates(double m1_objective, const std::string& answer) {
    return block(R"({"candidates": [
        {"id": "m1", "estimates": {"S": 4.2, "G1": 0.9, "G2": 0.7}, "objective": )" +
                 std::to_string(m1_objective) + R"(},
        {"id": "m2", "estimates": {"S": 3.0, "G1": 0.5, "G2": 0.5}, "objective": 0.75},
        {"id": "m3", "estimates": {"S": {"4": 0.5, "5": 0.5}, "G1": 0.8, "G2": 0.6}, "objective": 2.16}
    ], "answer": )" + answer + "}");
}

ResponseErrorKind kind_of(const std::string& text, PromptVariant v = PromptVariant::UtilityMax) {
    try {
        parse_response(text, movie_diagram(), v);
    } catch (const ResponseError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "parsed without error";
    return ResponseErrorKind::NoBlock;
}

}  // namespace

TEST(ResponseParse, ValidBlock) {
    const auto p = parse_response(three_candidates(2.646, R"(["m1", "m3", "m2"])"), movie_diagram(),
                                  PromptVariant::UtilityMax);
    ASSERT_EQ(p.candidates.size(), 3u);
    EXPECT_EQ(p.declared_answer, (std::vector<std::string>{"m1", "m3", "m2"}));
    EXPECT_TRUE(std::holds_alternative<ScalarValue>(p.candidates[0].per_node.at("S")));
    EXPECT_TRUE(std::holds_alternative<CategoricalDist>(p.candidates[2].per_node.at("S")));
    EXPECT_EQ(std::get<Probability>(p.candidates[0].per_node.at("G1")).p, 0.9);
}

TEST(ResponseParse, BaselineBlock) {
    const auto p = parse_response(block(R"({"answer": ["m7", "m2", "m3", "m4", "m5", "m6", "m1", "m8", "m9", "m10"]})"),
                                  movie_diagram(), PromptVariant::Basic);
    EXPECT_TRUE(p.candidates.empty());
    EXPECT_EQ(p.declared_answer.size(), 10u);
    EXPECT_EQ(p.declared_answer.front(), "m7");
}

TEST(ResponseParse, LastBlockWins) {
    const auto text = block(R"({"answer": ["draft"]})") + "\nOn reflection:\n" + block(R"({"answer": ["final"]})");
    EXPECT_EQ(parse_response(text, movie_diagram(), PromptVariant::Harsh).declared_answer,
              (std::vector<std::string>{"final"}));
}

TEST(ResponseParse, DistinguishableErrors) {
    EXPECT_EQ(kind_of("no block at all"), ResponseErrorKind::NoBlock);
    EXPECT_EQ(kind_of("```utilimax-jsonx\n{}\n```"), ResponseErrorKind::NoBlock);
    EXPECT_EQ(kind_of("```utilimax-json\n{\"answer\": [\"m1\"]"), ResponseErrorKind::MalformedBlock);
    EXPECT_EQ(kind_of(block("{not json")), ResponseErrorKind::MalformedBlock);
    EXPECT_EQ(kind_of(block(R"({"answer": []})"), PromptVariant::Basic), ResponseErrorKind::EmptyAnswer);
    EXPECT_EQ(kind_of(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1.3, "G2": 0.5}, "objective": 1}],
                               "answer": ["m1"]})")),
              ResponseErrorKind::ProbabilityOutOfRange);
    EXPECT_EQ(kind_of(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1, "G2": 0.5, "G3": 1}, "objective": 1}],
                               "answer": ["m1"]})")),
              ResponseErrorKind::UnknownNode);
    EXPECT_EQ(kind_of(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1}, "objective": 1}],
                               "answer": ["m1"]})")),
              ResponseErrorKind::MissingEstimate);
    EXPECT_EQ(kind_of(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 9, "G1": 1, "G2": 1}, "objective": 1}],
                               "answer": ["m1"]})")),
              ResponseErrorKind::InvalidEstimate);
    EXPECT_EQ(kind_of(block(R"({"candidates": [
                  {"id": "m1", "estimates": {"S": 4, "G1": 1, "G2": 1}, "objective": 4},
                  {"id": "m1", "estimates": {"S": 4, "G1": 1, "G2": 1}, "objective": 4}], "answer": ["m1"]})")),
              ResponseErrorKind::DuplicateCandidate);
    EXPECT_EQ(kind_of(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1, "G2": 1}, "objective": 4}],
                               "answer": ["m9"]})")),
              ResponseErrorKind::UnknownAnswerId);
    try {
        parse_response(block(R"({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1.3, "G2": 0.5}, "objective": 1}],
                                 "answer": ["m1"]})"),
                       movie_diagram(), PromptVariant::UtilityMax);
    } catch (const ResponseError& e) {
        EXPECT_STREQ(e.what(), "probability out of range: G1");
    }
}

TEST(ResponseAudit, OneFixturePerVerdict) {
    const auto d = movie_diagram();
    const auto consistent =
        audit_consistency(parse_response(three_candidates(2.646, R"(["m1", "m3", "m2"])"), d, PromptVariant::UtilityMax), d);
    EXPECT_EQ(consistent.verdict, Verdict::Consistent);
    EXPECT_TRUE(consistent.declared_matches_recomputed_ranking);
    EXPECT_NEAR(consistent.recomputed.at("m1"), 2.646, 1e-12);

    const auto drift =
        audit_consistency(parse_response(three_candidates(2.9, R"(["m1", "m3", "m2"])"), d, PromptVariant::UtilityMax), d);
    EXPECT_EQ(drift.verdict, Verdict::ArithmeticDrift);
    ASSERT_EQ(drift.arithmetic_deviations.size(), 1u);
    EXPECT_EQ(drift.arithmetic_deviations[0].candidate_id, "m1");
    EXPECT_NEAR(drift.arithmetic_deviations[0].recomputed_value, 2.646, 1e-12);

    const auto mismatch =
        audit_consistency(parse_response(three_candidates(2.646, R"(["m3", "m1", "m2"])"), d, PromptVariant::UtilityMax), d);
    EXPECT_EQ(mismatch.verdict, Verdict::RankingMismatch);
    EXPECT_EQ(mismatch.recomputed_ranking, (std::vector<std::string>{"m1", "m3", "m2"}));

    const auto unparseable = audit_consistency(ParsedResponse{}, d);
    EXPECT_EQ(unparseable.verdict, Verdict::Unparseable);
}

TEST(ResponseAudit, RoundingWithinTolerance) {
    const auto d = movie_diagram();
    // 2.6485 is inside 1e-3 relative of 2.646.
    EXPECT_EQ(audit_consistency(parse_response(three_candidates(2.6485, R"(["m1"])"), d, PromptVariant::UtilityMax), d)
                  .verdict,
              Verdict::Consistent);
}

TEST(ResponseAudit, InvariantToCandidateOrder) {
    const auto d = movie_diagram();
    auto p = parse_response(three_candidates(2.646, R"(["m1", "m3"])"), d, PromptVariant::UtilityMax);
    const auto base = audit_consistency(p, d);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(p.candidates.begin(), p.candidates.end(), rng);
        const auto r = audit_consistency(p, d);
        EXPECT_EQ(r.verdict, base.verdict);
        EXPECT_EQ(r.recomputed, base.recomputed);
        EXPECT_EQ(r.recomputed_ranking, base.recomputed_ranking);
    }
}

TEST(ResponseSerialize, RoundTrip) {
    const auto d = movie_diagram();
    for (const auto& text : {three_candidates(2.646, R"(["m1", "m3", "m2"])"),
                             three_candidates(1.5, R"(["m2"])")}) {
        const auto p = parse_response(text, d, PromptVariant::UtilityMax);
        const auto back = parse_response(serialize_response(p), d, PromptVariant::UtilityMax);
        EXPECT_EQ(back.candidates, p.candidates);
        EXPECT_EQ(back.declared_answer, p.declared_answer);
    }
    ParsedResponse baseline;
    baseline.declared_answer = {"m4", "m2"};
    EXPECT_EQ(parse_response(serialize_response(baseline), d, PromptVariant::Basic).declared_answer,
              baseline.declared_answer);
}
