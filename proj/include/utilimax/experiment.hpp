#pragma once

#include "utilimax/diagram.hpp"
#include "utilimax/llm_client.hpp"
#include "utilimax/movielens.hpp"
#include "utilimax/prompt.hpp"
#include "utilimax/response.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace utilimax {

/// Binary: gain 1 per positive match. Graded: gain = rating of a positive
/// match (0 otherwise); not part of the original protocol.
enum class GainMode { Binary, Graded };
/// Spread reported next to each mean: over per-user means or over all cells.
enum class StdOver { Users, Cells };

std::string_view to_string(GainMode g);
std::string_view to_string(StdOver s);

struct ExperimentConfig {
    std::filesystem::path ratings_path;
    std::filesystem::path movies_path;
    TextEncoding encoding = TextEncoding::Latin1;
    /// Empty: the built-in movie diagram.
    std::filesystem::path diagram_path;
    ProviderConfig provider;
    std::uint64_t seed = 0;
    std::size_t users = 20;
    std::size_t runs = 20;
    std::vector<PromptVariant> variants{PromptVariant::UtilityMax, PromptVariant::Basic, PromptVariant::Harsh};
    std::size_t k = 10;
    EligibilityCriteria eligibility;
    GainMode gain = GainMode::Binary;
    StdOver std_over = StdOver::Users;
    std::filesystem::path out_dir;
    /// SHA-256 of the config file bytes (empty for configs built in code).
    std::string config_hash;
};

/// Strict JSON config. Relative paths resolve against `base_dir`. Every
/// problem throws Error(Config).
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// A -> S (categorical rating 1..5), A -> G1 (comedy), A -> G2 (romance).
InfluenceDiagram movie_diagram();

/// Candidate id used in prompts and responses for a movie.
std::string movie_candidate_id(std::int64_t movie_id);

/// Prompt task for one user: the rated history as context, the candidate
/// pool as the options, top-k recommendations requested.
TaskSpec build_movie_task(const UserTask& user, std::size_t k);

struct CellKey {
    std::int64_t user_id = 0;
    std::size_t run = 0;
    PromptVariant variant = PromptVariant::UtilityMax;

    auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
    bool failed = false;
    std::string failure_reason;  // empty unless failed
    double precision = 0.0;
    double ndcg = 0.0;
    /// UtilityMax cells only.
    std::optional<Verdict> verdict;
    std::vector<std::string> ranking;  // top k actually scored
    int attempts = 0;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;  // values the std was taken over
};

struct VariantAggregate {
    MetricSummary precision;
    MetricSummary ndcg;
    std::size_t cells = 0;
    std::size_t failed = 0;
};

struct PValueEntry {
    PromptVariant treatment = PromptVariant::UtilityMax;
    PromptVariant baseline = PromptVariant::Basic;
    std::optional<double> p_value;
    std::size_t n_users = 0;
    std::string note;
};

struct ImprovementEntry {
    PromptVariant treatment = PromptVariant::UtilityMax;
    PromptVariant baseline = PromptVariant::Basic;
    std::string metric;  // "precision" | "ndcg"
    std::optional<double> percent;
    std::string note;
};

struct RunManifest {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string provider;
    std::string model;
    std::vector<std::int64_t> users;  // sampled order
    std::size_t runs = 0;
    std::vector<PromptVariant> variants;
    std::size_t k = 0;
    GainMode gain = GainMode::Binary;
    StdOver std_over = StdOver::Users;
    std::map<std::string, std::size_t> failure_counts;  // reason category -> cells
    std::map<std::string, std::size_t> verdict_counts;
};

struct MetricsReport {
    std::map<CellKey, CellResult> per_cell;
    std::map<PromptVariant, VariantAggregate> aggregates;
    std::vector<PValueEntry> p_values;
    std::vector<ImprovementEntry> improvements;
    RunManifest manifest;
};

/// One query of the plan, in deterministic send order (user, run, variant).
struct PlannedCell {
    CellKey key;
    QueryRequest request;
};

struct ExperimentPlan {
    std::vector<PlannedCell> cells;
    std::map<std::int64_t, UserTask> tasks;
    InfluenceDiagram diagram;
    std::vector<std::int64_t> users;
};

ExperimentPlan plan_experiment(const ExperimentConfig& cfg);

/// Scores one response against a user's ground truth. Never throws; failures
/// land in the result.
CellResult score_cell(const std::string* response_text, PromptVariant variant, const UserTask& user,
                      const InfluenceDiagram& d, std::size_t k, GainMode gain);

/// Fills aggregates, p-values, improvements and manifest counts from per_cell.
void summarize(MetricsReport& report);

MetricsReport run_experiment(const ExperimentConfig& cfg);
MetricsReport run_experiment(const ExperimentConfig& cfg, Provider& provider);

/// 100 * (mean_a / mean_b - 1) at full precision. Throws Error(InvalidArgument)
/// when mean_b is 0.
double relative_improvement(double mean_a, double mean_b);
/// Same, from a report's aggregates; `metric` is "precision" or "ndcg".
double relative_improvement(const MetricsReport& report, PromptVariant a, PromptVariant b,
                            std::string_view metric);
/// One decimal with a percent sign, e.g. "12.7%".
std::string format_percentage(double percent);

std::string serialize_report(const MetricsReport& report);
/// Reads a serialized report. Only "aggregates" is required; improvements
/// and p-values are recomputed from aggregates when absent.
MetricsReport parse_report(std::string_view text);
MetricsReport load_report(const std::filesystem::path& path);

std::string cells_csv(const MetricsReport& report);
std::string serialize_manifest(const MetricsReport& report);

/// Writes report.json, cells.csv and manifest.json into `dir`.
void write_experiment_outputs(const MetricsReport& report, const std::filesystem::path& dir);

/// Mean +/- std table, p-value table, improvement lines and failure counts.
std::string render_report_tables(const MetricsReport& report);

}  // namespace utilimax
