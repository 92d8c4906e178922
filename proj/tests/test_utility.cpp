#include "test_support.hpp"
#include "utilimax/error.hpp"
#include "utilimax/experiment.hpp"
#include "utilimax/oracle.hpp"
#include "utilimax/utility.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace utilimax;
using test_support::binary_node;
using test_support::diagram_json;

namespace {

CandidateEstimates est_of(std::map<std::string, EstimateEntry> per_node, std::string id = "c") {
    CandidateEstimates e;
    e.candidate_id = std::move(id);
    e.per_node = std::move(per_node);
    return e;
}

CandidateEstimates scored(const std::string& id, double objective) {
    CandidateEstimates e;
    e.candidate_id = id;
    e.objective = objective;
    return e;
}

InfluenceDiagram scalar_leaf_chain() {
    return parse_diagram_spec(diagram_json(
        binary_node("X1") + R"(, {"id": "X2", "kind": "chance", "domain": "scalar_expectation", "description": "value"})",
        R"(["A", "X1"], ["X1", "X2"])"));
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(UtilityCi, TwoBinaryNodes) {
    const auto d = test_support::binary_pair();
    EXPECT_DOUBLE_EQ(expected_utility_ci(d, est_of({{"X1", Probability{0.5}}, {"X2", Probability{0.5}}})), 0.25);
}

TEST(UtilityCi, MovieObjective) {
    const auto d = movie_diagram();
    const auto e = est_of({{"S", ScalarValue{4.2}}, {"G1", Probability{0.9}}, {"G2", Probability{0.7}}});
    EXPECT_NEAR(expected_utility_ci(d, e), 2.646, 1e-12);
    EXPECT_NEAR(expected_utility(d, e), 2.646, 1e-12);
}

TEST(UtilityCi, CategoricalDistribution) {
    const auto d = movie_diagram();
    const auto e = est_of({{"S", CategoricalDist{{{"5", 0.5}, {"3", 0.5}}}}, {"G1", Probability{1}}, {"G2", Probability{1}}});
    EXPECT_DOUBLE_EQ(expected_utility_ci(d, e), 4.0);
    EXPECT_DOUBLE_EQ(node_expectation(d.at("S"), CategoricalDist{{{"5", 0.5}, {"3", 0.5}}}), 4.0);
}

TEST(UtilityCi, Errors) {
    const auto d = movie_diagram();
    EXPECT_EQ(code_of([&] { expected_utility_ci(d, est_of({{"S", ScalarValue{4}}, {"G1", Probability{0.5}}})); }),
              ErrorCode::Estimate);
    EXPECT_EQ(code_of([&] {
                  expected_utility_ci(d, est_of({{"S", ScalarValue{4}}, {"G1", ScalarValue{0.5}}, {"G2", Probability{0.5}}}));
              }),
              ErrorCode::Estimate);
    try {
        expected_utility_ci(d, est_of({{"S", ScalarValue{4}}, {"G1", Probability{1.3}}, {"G2", Probability{0.5}}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "probability out of range: G1");
    }
    EXPECT_EQ(code_of([&] { node_expectation(d.at("S"), ScalarValue{5.5}); }), ErrorCode::Estimate);
    EXPECT_EQ(code_of([&] { node_expectation(d.at("S"), CategoricalDist{{{"5", 0.5}, {"3", 0.4}}}); }),
              ErrorCode::Estimate);
    EXPECT_EQ(code_of([&] { node_expectation(d.at("S"), CategoricalDist{{{"6", 1.0}}}); }), ErrorCode::Estimate);
    EXPECT_EQ(code_of([&] { expected_utility_ci(test_support::gated_chain(), est_of({})); }),
              ErrorCode::InvalidArgument);
}

TEST(UtilityGated, ChainExamples) {
    const auto d = test_support::gated_chain();
    const auto e = est_of({{"X1", Probability{0.8}}, {"X2", Probability{0.5}}});
    EXPECT_DOUBLE_EQ(expected_utility_gated(d, e), 0.4);
    EXPECT_EQ(expected_utility_gated(d, e), expected_utility_all_binary(d, e));
    EXPECT_DOUBLE_EQ(brute_force_eu(d, derive_joint_from_estimates(d, e)), 0.4);
}

TEST(UtilityGated, ScalarLeaf) {
    const auto d = scalar_leaf_chain();
    const auto e = est_of({{"X1", Probability{0.8}}, {"X2", ScalarValue{2.5}}});
    EXPECT_DOUBLE_EQ(expected_utility_gated(d, e), 2.0);
    EXPECT_DOUBLE_EQ(brute_force_eu(d, derive_joint_from_estimates(d, e)), 2.0);
    EXPECT_EQ(code_of([&] { expected_utility_gated(d, est_of({{"X1", ScalarValue{0.8}}, {"X2", ScalarValue{2.5}}})); }),
              ErrorCode::Estimate);
}

TEST(UtilityAllBinary, Examples) {
    const auto three = parse_diagram_spec(diagram_json(
        binary_node("X1") + ", " + binary_node("X2") + ", " + binary_node("X3"), R"(["A", "X1"], ["A", "X2"], ["A", "X3"])"));
    EXPECT_EQ(expected_utility_all_binary(
                  three, est_of({{"X1", Probability{1}}, {"X2", Probability{1}}, {"X3", Probability{1}}})),
              1.0);
    EXPECT_EQ(expected_utility_all_binary(
                  three, est_of({{"X1", Probability{0.7}}, {"X2", Probability{0}}, {"X3", Probability{0.9}}})),
              0.0);
    EXPECT_EQ(code_of([&] {
                  expected_utility_all_binary(movie_diagram(), est_of({{"S", ScalarValue{4}},
                                                                       {"G1", Probability{0.5}},
                                                                       {"G2", Probability{0.5}}}));
              }),
              ErrorCode::InvalidArgument);
}

TEST(UtilityJoint, GatedRowsAndCiRows) {
    const auto d = test_support::gated_chain();
    const auto jm = derive_joint_from_estimates(d, est_of({{"X1", Probability{0.8}}, {"X2", Probability{0.5}}}));
    ASSERT_EQ(jm.tables.size(), 2u);
    const auto& x2 = jm.tables[1];
    EXPECT_EQ(x2.node_id, "X2");
    EXPECT_EQ(x2.parents, (std::vector<std::string>{"X1"}));
    EXPECT_EQ(x2.rows.at({0}), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(x2.rows.at({1}), (std::vector<double>{0.5, 0.5}));

    const auto ci = derive_joint_from_estimates(test_support::binary_pair(),
                                                est_of({{"X1", Probability{0.5}}, {"X2", Probability{0.5}}}));
    for (const auto& t : ci.tables) {
        EXPECT_TRUE(t.parents.empty());
        EXPECT_EQ(t.rows.size(), 1u);
    }
    EXPECT_DOUBLE_EQ(brute_force_eu(test_support::binary_pair(), ci), 0.25);
}

TEST(UtilityJoint, SingleNodeAndLimits) {
    const auto one = parse_diagram_spec(diagram_json(binary_node("X1"), R"(["A", "X1"])"));
    EXPECT_DOUBLE_EQ(brute_force_eu(one, derive_joint_from_estimates(one, est_of({{"X1", Probability{0.3}}}))), 0.3);

    const auto big = load_diagram_file(test_support::source_dir() / "tests" / "fixtures" / "binary25.json");
    std::map<std::string, EstimateEntry> per;
    for (const auto& id : big.chance_ids()) per[id] = Probability{0.5};
    const auto jm = derive_joint_from_estimates(big, est_of(per));
    EXPECT_GT(joint_size(jm), kMaxJointAssignments);
    EXPECT_EQ(code_of([&] { brute_force_eu(big, jm); }), ErrorCode::JointTooLarge);

    JointModel missing = derive_joint_from_estimates(
        test_support::gated_chain(), est_of({{"X1", Probability{0.8}}, {"X2", Probability{0.5}}}));
    missing.tables[1].rows.erase(std::vector<int>{0});
    EXPECT_EQ(code_of([&] { brute_force_eu(test_support::gated_chain(), missing); }), ErrorCode::InvalidArgument);
}

TEST(UtilitySelect, Examples) {
    auto r = select_optimal({scored("m1", 2.646), scored("m2", 1.9)});
    EXPECT_EQ(r.best_candidate_id, "m1");
    EXPECT_FALSE(r.tie_note);

    r = select_optimal({scored("b", 0.4), scored("a", 0.4)});
    EXPECT_EQ(r.best_candidate_id, "a");
    ASSERT_TRUE(r.tie_note);
    EXPECT_NE(r.tie_note->find("a, b"), std::string::npos);

    r = select_optimal({scored("only", 0.1)});
    EXPECT_EQ(r.ranked.size(), 1u);
    EXPECT_EQ(r.best_candidate_id, "only");

    EXPECT_EQ(code_of([] { select_optimal({}); }), ErrorCode::InvalidArgument);
}

TEST(UtilityProperties, AnnihilationAndMonotonicity) {
    const auto d = movie_diagram();
    std::mt19937_64 rng(5);
    for (int t = 0; t < 500; ++t) {
        const double s = 1.0 + 4.0 * unit_uniform(rng);
        const double g1 = unit_uniform(rng), g2 = unit_uniform(rng);
        const double base = expected_utility(d, est_of({{"S", ScalarValue{s}}, {"G1", Probability{g1}}, {"G2", Probability{g2}}}));
        const double up = expected_utility(
            d, est_of({{"S", ScalarValue{s}}, {"G1", Probability{g1 + (1 - g1) * unit_uniform(rng)}}, {"G2", Probability{g2}}}));
        EXPECT_GE(up, base);
        EXPECT_EQ(expected_utility(d, est_of({{"S", ScalarValue{s}}, {"G1", Probability{0}}, {"G2", Probability{g2}}})), 0.0);
    }
    const auto chain = scalar_leaf_chain();
    EXPECT_EQ(expected_utility(chain, est_of({{"X1", Probability{0.6}}, {"X2", ScalarValue{0}}})), 0.0);
    EXPECT_EQ(expected_utility(chain, est_of({{"X1", Probability{0}}, {"X2", ScalarValue{3}}})), 0.0);
}

TEST(UtilityProperties, RegimesAgreeExactlyOnAllBinary) {
    std::mt19937_64 rng(9);
    const auto ci = test_support::binary_pair();
    const auto chain = test_support::gated_chain();
    for (int t = 0; t < 1000; ++t) {
        const auto e = est_of({{"X1", Probability{unit_uniform(rng)}}, {"X2", Probability{unit_uniform(rng)}}});
        EXPECT_EQ(expected_utility_ci(ci, e), expected_utility_all_binary(ci, e));
        EXPECT_EQ(expected_utility_gated(chain, e), expected_utility_all_binary(chain, e));
    }
}

TEST(UtilityOracle, RandomEstimatesMatchBruteForce) {
    for (const auto& d : {movie_diagram(), test_support::gated_chain(), scalar_leaf_chain()}) {
        const auto r = oracle_check(d, 300, 17);
        EXPECT_EQ(r.trials, 300u);
        EXPECT_LE(r.max_abs_deviation, kOracleTolerance);
    }
    EXPECT_THROW(oracle_check(load_diagram_file(test_support::source_dir() / "tests" / "fixtures" / "intractable.json"),
                              10, 1),
                 Error);
}
