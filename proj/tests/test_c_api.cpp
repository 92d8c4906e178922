#include "utilimax/utilimax.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::filesystem::path kSource = UTILIMAX_SOURCE_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string take(char* s) {
    std::string out = s ? s : "";
    um_string_free(s);
    return out;
}

struct Diagram {
    um_diagram* d = nullptr;
    ~Diagram() { um_diagram_free(d); }
};

}  // namespace

TEST(CApi, LoadValidateClassify) {
    Diagram g;
    ASSERT_EQ(um_diagram_load((kSource / "data" / "movie_diagram.json").c_str(), &g.d), UM_OK);
    int ok = 0;
    char* report = nullptr;
    ASSERT_EQ(um_diagram_validate(g.d, &ok, &report), UM_OK);
    EXPECT_EQ(ok, 1);
    EXPECT_EQ(take(report), "");
    char* tag = nullptr;
    char* detail = nullptr;
    ASSERT_EQ(um_diagram_classify(g.d, &tag, &detail), UM_OK);
    EXPECT_EQ(take(tag), "ConditionallyIndependent");
    take(detail);
    char* objective = nullptr;
    ASSERT_EQ(um_diagram_objective(g.d, &objective), UM_OK);
    EXPECT_EQ(take(objective), "O(a) = E[S | A=a] x P(G1=1 | A=a) x P(G2=1 | A=a)");
    char* fp = nullptr;
    ASSERT_EQ(um_diagram_fingerprint(g.d, &fp), UM_OK);
    EXPECT_EQ(take(fp).size(), 64u);
    char* dot = nullptr;
    ASSERT_EQ(um_diagram_to_dot(g.d, &dot), UM_OK);
    EXPECT_NE(take(dot).find("digraph"), std::string::npos);
}

TEST(CApi, InvalidDiagramReport) {
    Diagram g;
    ASSERT_EQ(um_diagram_load((kSource / "tests" / "fixtures" / "cyclic.json").c_str(), &g.d), UM_OK);
    int ok = 1;
    char* report = nullptr;
    ASSERT_EQ(um_diagram_validate(g.d, &ok, &report), UM_OK);
    EXPECT_EQ(ok, 0);
    EXPECT_NE(take(report).find("acyclicity: "), std::string::npos);
    char* tag = nullptr;
    EXPECT_EQ(um_diagram_classify(g.d, &tag, nullptr), UM_ERR_VALIDATION);
    EXPECT_NE(std::string(um_last_error()), "");
}

TEST(CApi, ErrorStatuses) {
    um_diagram* d = nullptr;
    EXPECT_EQ(um_diagram_parse("{", &d), UM_ERR_PARSE);
    EXPECT_NE(std::string(um_last_error()).find("line"), std::string::npos);
    EXPECT_EQ(um_diagram_load("/nonexistent.json", &d), UM_ERR_IO);
    EXPECT_EQ(um_diagram_parse(nullptr, &d), UM_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(d, nullptr);
    EXPECT_STREQ(um_status_name(UM_ERR_JOINT_TOO_LARGE), "joint_too_large");
    EXPECT_STREQ(um_status_name(UM_OK), "ok");
}

TEST(CApi, CompilePrompt) {
    Diagram g;
    ASSERT_EQ(um_diagram_load((kSource / "tests" / "golden" / "template_diagram.json").c_str(), &g.d), UM_OK);
    const auto task = slurp(kSource / "tests" / "golden" / "template_task.json");
    char* prompt = nullptr;
    char* fp = nullptr;
    ASSERT_EQ(um_compile_prompt(g.d, task.c_str(), "utilitymax", &prompt, &fp), UM_OK);
    EXPECT_EQ(take(prompt), slurp(kSource / "tests" / "golden" / "template_prompt.txt"));
    EXPECT_EQ(take(fp).size(), 64u);

    ASSERT_EQ(um_compile_prompt(nullptr, task.c_str(), "basic", &prompt, nullptr), UM_OK);
    EXPECT_NE(take(prompt).find("cover letter"), std::string::npos);
    EXPECT_EQ(um_compile_prompt(nullptr, task.c_str(), "fancy", &prompt, nullptr), UM_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(um_compile_prompt(nullptr, task.c_str(), "utilitymax", &prompt, nullptr), UM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ExpectedUtilityAndOracle) {
    Diagram g;
    ASSERT_EQ(um_diagram_load((kSource / "data" / "movie_diagram.json").c_str(), &g.d), UM_OK);
    double eu = 0;
    ASSERT_EQ(um_expected_utility(g.d, R"({"S": 4.2, "G1": 0.9, "G2": 0.7})", &eu), UM_OK);
    EXPECT_NEAR(eu, 2.646, 1e-12);
    ASSERT_EQ(um_expected_utility(g.d, R"({"S": {"5": 0.5, "3": 0.5}, "G1": 1, "G2": 1})", &eu), UM_OK);
    EXPECT_DOUBLE_EQ(eu, 4.0);
    EXPECT_EQ(um_expected_utility(g.d, R"({"S": 4.2, "G1": 1.3, "G2": 0.7})", &eu), UM_ERR_ESTIMATE);
    EXPECT_STREQ(um_last_error(), "probability out of range: G1");

    double dev = 1;
    ASSERT_EQ(um_oracle_check(g.d, 200, 3, &dev), UM_OK);
    EXPECT_LE(dev, 1e-12);
    EXPECT_EQ(um_oracle_check(g.d, 0, 3, &dev), UM_ERR_INVALID_ARGUMENT);

    Diagram big;
    ASSERT_EQ(um_diagram_load((kSource / "tests" / "fixtures" / "binary25.json").c_str(), &big.d), UM_OK);
    EXPECT_EQ(um_oracle_check(big.d, 1, 1, &dev), UM_ERR_JOINT_TOO_LARGE);
}

TEST(CApi, AuditResponse) {
    Diagram g;
    ASSERT_EQ(um_diagram_load((kSource / "data" / "movie_diagram.json").c_str(), &g.d), UM_OK);
    char* audit = nullptr;
    ASSERT_EQ(um_audit_response(g.d,
                                "```utilimax-json\n{\"candidates\": [{\"id\": \"m1\", \"estimates\": {\"S\": 4.2, "
                                "\"G1\": 0.9, \"G2\": 0.7}, \"objective\": 2.9}], \"answer\": [\"m1\"]}\n```\n",
                                &audit),
              UM_OK);
    const auto text = take(audit);
    EXPECT_NE(text.find("\"verdict\": \"ArithmeticDrift\""), std::string::npos);
    ASSERT_EQ(um_audit_response(g.d, "nothing here", &audit), UM_OK);
    EXPECT_NE(take(audit).find("\"error_kind\": \"no_block\""), std::string::npos);
}

TEST(CApi, EvalAndReport) {
    const auto out = std::filesystem::temp_directory_path() / "utilimax_c_api_eval";
    std::filesystem::remove_all(out);
    char* tables = nullptr;
    ASSERT_EQ(um_eval_run((kSource / "data" / "mini" / "eval_config.json").c_str(), out.c_str(), &tables), UM_OK)
        << um_last_error();
    const auto rendered = take(tables);
    EXPECT_NE(rendered.find("UtilityMax"), std::string::npos);
    ASSERT_EQ(um_report_render((out / "report.json").c_str(), &tables), UM_OK);
    EXPECT_EQ(take(tables), rendered);
    EXPECT_EQ(um_eval_run((kSource / "tests" / "fixtures" / "bad_config.json").c_str(), nullptr, &tables),
              UM_ERR_CONFIG);
    EXPECT_EQ(um_report_render("/nonexistent/report.json", &tables), UM_ERR_IO);
}
