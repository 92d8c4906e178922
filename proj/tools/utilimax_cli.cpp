// Command-line front end. Talks to the library only through the C API.
// Exit codes: 0 success, 1 domain error, 2 usage or config error.

#include "utilimax/utilimax.h"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct StringDeleter {
    void operator()(char* s) const { um_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct DiagramDeleter {
    void operator()(um_diagram* d) const { um_diagram_free(d); }
};
using OwnedDiagram = std::unique_ptr<um_diagram, DiagramDeleter>;

int report_failure(um_status s) {
    std::cerr << "error: " << um_last_error() << "\n";
    return s == UM_ERR_CONFIG || s == UM_ERR_INVALID_ARGUMENT ? kExitUsage : kExitDomain;
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int load(const std::string& path, OwnedDiagram& out) {
    um_diagram* d = nullptr;
    if (auto s = um_diagram_load(path.c_str(), &d); s != UM_OK) return report_failure(s);
    out.reset(d);
    return kExitOk;
}

int cmd_validate(const std::string& spec) {
    OwnedDiagram d;
    if (int rc = load(spec, d)) return rc == kExitUsage ? kExitDomain : rc;
    int ok = 0;
    char* report = nullptr;
    if (auto s = um_diagram_validate(d.get(), &ok, &report); s != UM_OK) return report_failure(s);
    OwnedString owned(report);
    if (!ok) {
        std::cout << "invalid\n" << report;
        return kExitDomain;
    }
    char* tag = nullptr;
    char* detail = nullptr;
    if (auto s = um_diagram_classify(d.get(), &tag, &detail); s != UM_OK) return report_failure(s);
    OwnedString t(tag), dt(detail);
    std::cout << "valid\n" << tag << "\n";
    if (*detail) std::cout << detail << "\n";
    return kExitOk;
}

int cmd_compile(const std::string& spec, const std::string& task, const std::string& variant,
                const std::string& out) {
    OwnedDiagram d;
    if (variant == "utilitymax" || !spec.empty()) {
        if (spec.empty()) {
            std::cerr << "error: --spec is required for the utilitymax variant\n";
            return kExitUsage;
        }
        if (load(spec, d)) return kExitDomain;
    }
    const auto task_text = read_file(task);
    if (!task_text) {
        std::cerr << "error: cannot open file: " << task << "\n";
        return kExitDomain;
    }
    char* prompt = nullptr;
    char* fingerprint = nullptr;
    if (auto s = um_compile_prompt(d.get(), task_text->c_str(), variant.c_str(), &prompt, &fingerprint); s != UM_OK) {
        std::cerr << "error: " << um_last_error() << "\n";
        return s == UM_ERR_INVALID_ARGUMENT ? kExitUsage : kExitDomain;
    }
    OwnedString p(prompt), f(fingerprint);
    if (out.empty() || out == "-") {
        std::cout << prompt;
    } else {
        std::ofstream o(out, std::ios::binary | std::ios::trunc);
        if (!(o << prompt)) {
            std::cerr << "error: cannot write file: " << out << "\n";
            return kExitDomain;
        }
    }
    std::cerr << "fingerprint: " << fingerprint << "\n";
    return kExitOk;
}

int cmd_oracle_check(const std::string& spec, std::uint64_t trials, std::uint64_t seed) {
    OwnedDiagram d;
    if (load(spec, d)) return kExitDomain;
    double dev = 0.0;
    if (auto s = um_oracle_check(d.get(), trials, seed, &dev); s != UM_OK) {
        std::cerr << "error: " << um_last_error() << "\n";
        return s == UM_ERR_INVALID_ARGUMENT ? kExitUsage : kExitDomain;
    }
    const bool pass = dev <= 1e-12;
    std::cout << (pass ? "PASS" : "FAIL") << " trials=" << trials << " max_abs_deviation=" << dev << "\n";
    return pass ? kExitOk : kExitDomain;
}

int cmd_eval(const std::string& config, const std::string& out) {
    char* tables = nullptr;
    if (auto s = um_eval_run(config.c_str(), out.empty() ? nullptr : out.c_str(), &tables); s != UM_OK) {
        return report_failure(s);
    }
    OwnedString t(tables);
    std::cout << tables;
    return kExitOk;
}

int cmd_report(const std::string& report) {
    char* tables = nullptr;
    if (auto s = um_report_render(report.c_str(), &tables); s != UM_OK) {
        std::cerr << "error: " << um_last_error() << "\n";
        return kExitDomain;
    }
    OwnedString t(tables);
    std::cout << tables;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Influence-diagram prompting toolkit"};
    app.require_subcommand(1, 1);

    std::string spec, task, variant = "utilitymax", out, config, report;
    std::uint64_t trials = 1000, seed = 0;

    auto* validate = app.add_subcommand("validate", "Check a diagram spec and print its structure class");
    validate->add_option("--spec", spec, "Diagram spec file")->required();

    auto* compile = app.add_subcommand("compile", "Compile a prompt for a task");
    compile->add_option("--spec", spec, "Diagram spec file (utilitymax variant)");
    compile->add_option("--task", task, "Task file")->required();
    compile->add_option("--variant", variant, "utilitymax | basic | harsh")
        ->check(CLI::IsMember({"utilitymax", "basic", "harsh"}));
    compile->add_option("--out", out, "Output file (default: stdout)");

    auto* oracle = app.add_subcommand("oracle-check", "Compare factorized and brute-force expected utility");
    oracle->add_option("--spec", spec, "Diagram spec file")->required();
    oracle->add_option("--trials", trials, "Random estimate sets")->check(CLI::PositiveNumber);
    oracle->add_option("--seed", seed, "Random seed");

    auto* eval = app.add_subcommand("eval", "Run an experiment");
    eval->add_option("--config", config, "Experiment config file")->required();
    eval->add_option("--out", out, "Output directory (overrides the config)");

    auto* rep = app.add_subcommand("report", "Render the tables of a report.json");
    rep->add_option("--report", report, "report.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*validate) return cmd_validate(spec);
    if (*compile) return cmd_compile(spec, task, variant, out);
    if (*oracle) return cmd_oracle_check(spec, trials, seed);
    if (*eval) return cmd_eval(config, out);
    return cmd_report(report);
}
