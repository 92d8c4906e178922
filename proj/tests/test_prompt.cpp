#include "test_support.hpp"
#include "utilimax/error.hpp"
#include "utilimax/experiment.hpp"
#include "utilimax/prompt.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace utilimax;
using test_support::binary_node;
using test_support::diagram_json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

std::vector<std::string> paragraphs(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find("\n\n", start);
        if (end == std::string::npos) end = text.size();
        out.push_back(text.substr(start, end - start));
        start = end + 2;
    }
    return out;
}

TaskSpec movie_task() {
    return load_task_file(test_support::source_dir() / "tests" / "fixtures" / "movie_task.json");
}

}  // namespace

TEST(PromptGolden, TwoVariableTemplateMatchesByteForByte) {
    const auto golden = test_support::source_dir() / "tests" / "golden";
    const auto d = load_diagram_file(golden / "template_diagram.json");
    const auto task = load_task_file(golden / "template_task.json");
    EXPECT_EQ(compile_utilitymax_prompt(task, d).text, slurp(golden / "template_prompt.txt"));
}

TEST(PromptUtilityMax, MovieObjective) {
    const auto a = compile_utilitymax_prompt(movie_task(), movie_diagram());
    EXPECT_EQ(a.objective_rendering, "O(a) = E[S | A=a] x P(G1=1 | A=a) x P(G2=1 | A=a)");
    EXPECT_EQ(a.variant, PromptVariant::UtilityMax);
    EXPECT_EQ(a.diagram_fingerprint, diagram_fingerprint(movie_diagram()));
    EXPECT_EQ(a.fingerprint().size(), 64u);
}

TEST(PromptUtilityMax, CompletenessAndStepList) {
    const auto d = movie_diagram();
    const auto text = compile_utilitymax_prompt(movie_task(), d).text;
    for (const auto& id : d.chance_ids()) {
        EXPECT_EQ(count_of(text, "Let " + id + " | "), 1u) << id;
        EXPECT_NE(text.find(render_objective_term(d, id)), std::string::npos) << id;
    }
    const auto s = text.find("Let S | "), g1 = text.find("Let G1 | "), g2 = text.find("Let G2 | ");
    EXPECT_LT(s, g1);
    EXPECT_LT(g1, g2);
    const auto step1 = text.find("1. Generate a set of candidate answers.");
    const auto step2 = text.find("2. For each candidate answer, estimate");
    const auto step3 = text.find("3. Return the 3 answers with the highest O(a)");
    ASSERT_NE(step1, std::string::npos);
    EXPECT_LT(step1, step2);
    EXPECT_LT(step2, step3);
    EXPECT_NE(text.find("```utilimax-json"), std::string::npos);
}

TEST(PromptUtilityMax, Deterministic) {
    EXPECT_EQ(compile_utilitymax_prompt(movie_task(), movie_diagram()).text,
              compile_utilitymax_prompt(movie_task(), movie_diagram()).text);
}

TEST(PromptUtilityMax, GatedChainConditioning) {
    const auto text = compile_utilitymax_prompt(movie_task(), test_support::gated_chain()).text;
    EXPECT_NE(text.find("Let X2 | X1=1, A=a be a random variable"), std::string::npos);
    EXPECT_NE(text.find("given that X1 = 1"), std::string::npos);
    EXPECT_NE(text.find("O(a) = P(X1=1 | A=a) x P(X2=1 | X1=1, A=a)"), std::string::npos);
}

TEST(PromptUtilityMax, Errors) {
    const auto intractable =
        load_diagram_file(test_support::source_dir() / "tests" / "fixtures" / "intractable.json");
    try {
        compile_utilitymax_prompt(movie_task(), intractable);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Intractable);
    }
    TaskSpec empty = movie_task();
    empty.description.clear();
    try {
        compile_utilitymax_prompt(empty, movie_diagram());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}

TEST(PromptVariableBlock, Examples) {
    NodeSpec g1{"G1", NodeKind::Chance, Domain::binary(), "the movie belongs to the comedy genre", {}};
    EXPECT_EQ(render_variable_block(g1, {}),
              "Let G1 | A=a be a random variable representing whether the movie belongs to the comedy genre "
              "given answer a.");
    const auto movie = movie_diagram();
    const auto& s = movie.at("S");
    EXPECT_NE(render_variable_block(s, {}).find("scores 1, 2, 3, 4, 5"), std::string::npos);
    NodeSpec x1{"X1", NodeKind::Chance, Domain::binary(), "d", {}};
    NodeSpec x2{"X2", NodeKind::Chance, Domain::binary(), "d", {}};
    EXPECT_NE(render_variable_block(x2, {x1}).find("given that X1 = 1"), std::string::npos);
}

TEST(PromptBaseline, BasicAndHarsh) {
    const auto task = movie_task();
    const auto basic = compile_baseline_prompt(task, PromptVariant::Basic);
    const auto harsh = compile_baseline_prompt(task, PromptVariant::Harsh);
    EXPECT_NE(basic.text.find("The user is in the mood for comedy and romance movies."), std::string::npos);
    EXPECT_EQ(basic.text.find("O(a)"), std::string::npos);
    EXPECT_NE(harsh.text.find("You should not suggest anything outside of these genres."), std::string::npos);
    EXPECT_TRUE(basic.diagram_fingerprint.empty());
    EXPECT_THROW(compile_baseline_prompt(task, PromptVariant::UtilityMax), Error);

    const auto pb = paragraphs(basic.text), ph = paragraphs(harsh.text);
    ASSERT_EQ(pb.size(), ph.size());
    std::size_t differing = 0;
    for (std::size_t i = 0; i < pb.size(); ++i) {
        if (pb[i] != ph[i]) {
            ++differing;
            EXPECT_NE(pb[i].find("in the mood for"), std::string::npos);
        }
    }
    EXPECT_EQ(differing, 1u);
}

TEST(PromptBaseline, CandidatePoolParity) {
    const auto task = movie_task();
    const std::string pool =
        "Candidate movies:\n\n- m1: Notting Hill (1999)\n- m2: Alien (1979)\n- m3: Groundhog Day (1993)\n"
        "- m4: Sleepless in Seattle (1993)\n\n";
    for (const auto& text : {compile_utilitymax_prompt(task, movie_diagram()).text,
                             compile_baseline_prompt(task, PromptVariant::Basic).text,
                             compile_baseline_prompt(task, PromptVariant::Harsh).text}) {
        EXPECT_EQ(count_of(text, pool), 1u);
        EXPECT_EQ(text.find(task.description), text.find("Recommend the top 3"));
    }
}

TEST(PromptTask, ParsingErrorsAndVariants) {
    EXPECT_THROW(parse_task_spec(R"({"description": "x", "colour": 1})"), Error);
    EXPECT_THROW(parse_task_spec(R"({"description": "x", "candidates": [{"id": "a"}, {"id": "a"}]})"), Error);
    EXPECT_THROW(parse_task_spec(R"({"description": "x", "top_k": -1})"), Error);
    EXPECT_EQ(parse_variant("UtilityMax"), PromptVariant::UtilityMax);
    EXPECT_EQ(parse_variant("harsh"), PromptVariant::Harsh);
    EXPECT_FALSE(parse_variant("gentle"));
}
