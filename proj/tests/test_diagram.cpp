#include "test_support.hpp"
#include "utilimax/diagram.hpp"
#include "utilimax/error.hpp"
#include "utilimax/experiment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace utilimax;
using test_support::binary_node;
using test_support::diagram_json;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_diagram_spec(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

InfluenceDiagram ci_of(int n) {
    std::string nodes, edges;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) {
            nodes += ", ";
            edges += ", ";
        }
        nodes += binary_node("X" + std::to_string(i));
        edges += R"(["A", "X)" + std::to_string(i) + R"("])";
    }
    return parse_diagram_spec(diagram_json(nodes, edges));
}

}  // namespace

TEST(DiagramParse, ThreeNodeSpec) {
    const auto d = test_support::binary_pair();
    EXPECT_EQ(d.nodes().size(), 3u);
    EXPECT_EQ(d.edges().size(), 2u);
    EXPECT_EQ(d.decision_id(), "A");
    EXPECT_EQ(d.chance_ids(), (std::vector<std::string>{"X1", "X2"}));
}

TEST(DiagramParse, DanglingEdge) {
    EXPECT_EQ(error_of(diagram_json(binary_node("X1"), R"(["A", "X1"], ["X1", "X9"])")),
              "dangling edge reference: X9");
}

TEST(DiagramParse, SyntaxErrorReportsPosition) {
    try {
        parse_diagram_spec("{\n  \"nodes\": [\n    {\"id\": \"A\",, }\n  ]\n}");
        FAIL() << "expected a syntax error";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_GT(e.column(), 1u);
        EXPECT_EQ(e.code(), ErrorCode::Parse);
    }
}

TEST(DiagramParse, RejectsUnknownKindDomainAndKeys) {
    EXPECT_NE(error_of(diagram_json(R"({"id": "X1", "kind": "utility", "domain": "binary"})", "")).find("unknown node kind"),
              std::string::npos);
    EXPECT_NE(error_of(diagram_json(R"({"id": "X1", "kind": "chance", "domain": "gaussian"})", "")).find("unknown domain"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"nodes": [], "edges": [], "utility": "sum"})").find("unknown key 'utility'"),
              std::string::npos);
    EXPECT_NE(error_of(diagram_json(R"({"id": "X1", "kind": "chance", "domain": "binary", "colour": 1})", ""))
                  .find("unknown key 'colour'"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"nodes": []})").find("edges"), std::string::npos);
}

TEST(DiagramParse, MovieDiagramIsConditionallyIndependent) {
    const auto d = load_diagram_file(test_support::source_dir() / "data" / "movie_diagram.json");
    EXPECT_EQ(d.nodes().size(), 4u);
    const auto& s = d.at("S");
    EXPECT_EQ(s.domain.kind, DomainKind::Categorical);
    EXPECT_EQ(s.domain.scores, (std::vector<double>{1, 2, 3, 4, 5}));
    EXPECT_EQ(classify_tractability(d).tag, StructureTag::ConditionallyIndependent);
    EXPECT_EQ(d, movie_diagram());
}

TEST(DiagramParse, CategoricalScoresAndFactors) {
    const auto d = parse_diagram_spec(diagram_json(
        R"({"id": "Q", "kind": "chance", "domain": "categorical", "labels": ["low", "high"], "scores": [0.5, 2],
            "description": "quality", "factor": {"score_map": {"low": 0, "high": 3}}})",
        R"(["A", "Q"])"));
    EXPECT_EQ(d.at("Q").factor.form, FactorForm::ScoreMap);
    EXPECT_EQ(factor_values(d.at("Q")), (std::vector<double>{0, 3}));
    EXPECT_TRUE(validate_structure(d).ok());
}

TEST(DiagramParse, MissingFileIsIoError) {
    try {
        load_diagram_file("/nonexistent/diagram.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
        EXPECT_NE(std::string(e.what()).find("/nonexistent/diagram.json"), std::string::npos);
    }
}

TEST(DiagramValidate, FigureOneTopologyIsValid) {
    EXPECT_TRUE(validate_structure(ci_of(4)).ok());
}

TEST(DiagramValidate, Cycle) {
    const auto d = parse_diagram_spec(
        diagram_json(binary_node("X1") + ", " + binary_node("X2"), R"(["A", "X1"], ["X1", "X2"], ["X2", "X1"])"));
    const auto r = validate_structure(d);
    EXPECT_TRUE(r.has("acyclicity"));
    EXPECT_THROW(topological_order(d), Error);
    EXPECT_THROW(classify_tractability(d), Error);
}

TEST(DiagramValidate, TwoDecisionNodes) {
    const auto d = parse_diagram_spec(R"({"nodes": [{"id": "A", "kind": "decision"}, {"id": "B", "kind": "decision"},
        {"id": "X1", "kind": "chance", "domain": "binary", "description": "d"}], "edges": [["A", "X1"], ["B", "X1"]]})");
    EXPECT_TRUE(validate_structure(d).has("singular-decision-root"));
}

TEST(DiagramValidate, StructuralRules) {
    EXPECT_TRUE(validate_structure(parse_diagram_spec(R"({"nodes": [{"id": "A", "kind": "decision"}], "edges": []})"))
                    .has("chance-nodes"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(binary_node("X1"), R"(["A", "X1"], ["X1", "X1"])")))
                    .has("self-edge"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(binary_node("X1"), R"(["A", "X1"], ["A", "X1"])")))
                    .has("duplicate-edge"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(binary_node("X1") + ", " + binary_node("X2"),
                                                                   R"(["A", "X1"])")))
                    .has("reachability"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(binary_node("X1"), R"(["A", "X1"], ["X1", "A"])")))
                    .has("decision-no-parents"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(
                                       R"({"id": "X1", "kind": "chance", "domain": "binary"})", R"(["A", "X1"])")))
                    .has("chance-description"));
    EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(binary_node("X1") + ", " + binary_node("X1"),
                                                                   R"(["A", "X1"])")))
                    .has("unique-ids"));
}

TEST(DiagramValidate, CategoricalAndFactorRules) {
    auto check = [](const std::string& node, const std::string& edges, const char* rule) {
        EXPECT_TRUE(validate_structure(parse_diagram_spec(diagram_json(node, edges))).has(rule)) << rule;
    };
    check(R"({"id": "S", "kind": "chance", "domain": "categorical", "labels": ["1"], "description": "s"})",
          R"(["A", "S"])", "categorical-labels");
    check(R"({"id": "S", "kind": "chance", "domain": "categorical", "labels": ["a", "b"], "scores": [1, 1], "description": "s"})",
          R"(["A", "S"])", "categorical-labels");
    // Score maps are for leaves only; internal binary nodes must keep f(x) = x.
    check(R"({"id": "X1", "kind": "chance", "domain": "binary", "description": "d", "factor": {"score_map": {"0": 0, "1": 2}}}, )" +
              binary_node("X2"),
          R"(["A", "X1"], ["X1", "X2"])", "factor-internal-identity");
}

TEST(DiagramClassify, Examples) {
    EXPECT_EQ(classify_tractability(test_support::gated_chain()).tag, StructureTag::BinaryGated);
    EXPECT_EQ(classify_tractability(test_support::binary_pair()).tag, StructureTag::ConditionallyIndependent);
    const auto cat_chain = parse_diagram_spec(diagram_json(
        R"({"id": "X1", "kind": "chance", "domain": "categorical", "labels": ["1", "2"], "description": "c"}, )" +
            binary_node("X2"),
        R"(["A", "X1"], ["X1", "X2"])"));
    const auto c = classify_tractability(cat_chain);
    EXPECT_EQ(c.tag, StructureTag::Intractable);
    EXPECT_NE(c.detail.find("X1"), std::string::npos);
}

TEST(DiagramClassify, AddingChanceEdgeNeverKeepsConditionalIndependence) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 8);
        const auto base = ci_of(n);
        const int a = 1 + static_cast<int>(rng() % n);
        int b = 1 + static_cast<int>(rng() % n);
        if (a == b) b = a % n + 1;
        auto edges = base.edges();
        edges.push_back({"X" + std::to_string(a), "X" + std::to_string(b)});
        const InfluenceDiagram d(base.task(), base.nodes(), edges);
        ASSERT_TRUE(validate_structure(d).ok());
        EXPECT_NE(classify_tractability(d).tag, StructureTag::ConditionallyIndependent);
    }
}

TEST(DiagramOrder, TopologicalExamples) {
    EXPECT_EQ(topological_order(test_support::binary_pair()), (std::vector<std::string>{"A", "X1", "X2"}));
    const auto d = parse_diagram_spec(
        diagram_json(binary_node("X1") + ", " + binary_node("X2"), R"(["A", "X2"], ["X2", "X1"])"));
    EXPECT_EQ(topological_order(d), (std::vector<std::string>{"A", "X2", "X1"}));
}

TEST(DiagramOrder, PermutationWithDecisionFirst) {
    const auto d = movie_diagram();
    auto order = topological_order(d);
    EXPECT_EQ(order.front(), "A");
    EXPECT_EQ(order, (std::vector<std::string>{"A", "G1", "G2", "S"}));
    EXPECT_EQ(declaration_order(d), (std::vector<std::string>{"A", "S", "G1", "G2"}));
}

TEST(DiagramSerialize, RoundTripAndFingerprint) {
    for (const auto& d : {movie_diagram(), test_support::gated_chain(), ci_of(5)}) {
        const auto text = serialize_diagram(d);
        const auto back = parse_diagram_spec(text);
        EXPECT_EQ(back, d);
        EXPECT_EQ(serialize_diagram(back), text);
        EXPECT_EQ(diagram_fingerprint(back), diagram_fingerprint(d));
        EXPECT_EQ(diagram_fingerprint(d).size(), 64u);
    }
    EXPECT_NE(diagram_fingerprint(movie_diagram()), diagram_fingerprint(ci_of(3)));
}

TEST(DiagramExport, DotIncludesUtilityNode) {
    const auto dot = to_dot(test_support::gated_chain());
    EXPECT_NE(dot.find("digraph"), std::string::npos);
    EXPECT_NE(dot.find("\"U\""), std::string::npos);
    EXPECT_NE(dot.find("\"X1\" -> \"X2\""), std::string::npos);
}
