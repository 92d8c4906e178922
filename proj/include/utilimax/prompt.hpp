#pragma once

#include "utilimax/diagram.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace utilimax {

enum class PromptVariant { UtilityMax, Basic, Harsh };

std::string_view to_string(PromptVariant v);
/// Accepts "utilitymax", "basic", "harsh" (case-insensitive).
std::optional<PromptVariant> parse_variant(std::string_view s);

struct CandidateOption {
    std::string id;
    std::string text;
};

/// What the model is asked to do, plus the external knowledge placed in K.
struct TaskSpec {
    std::string description;
    std::optional<std::string> context;
    std::string candidate_instruction;
    std::vector<CandidateOption> candidates;
    /// Baseline preference, e.g. "comedy and romance movies".
    std::string preference;
    /// What the Harsh prompt forbids leaving, e.g. "these genres".
    std::string preference_scope = "these categories";
    /// Number of answers requested; 0 asks for a single a*.
    std::size_t top_k = 0;
};

/// Strict JSON reader for task files (keys: description, context,
/// candidate_instruction, candidates[{id,text}], preference, preference_scope, top_k).
TaskSpec parse_task_spec(std::string_view text);
TaskSpec load_task_file(const std::filesystem::path& path);

struct PromptArtifact {
    PromptVariant variant = PromptVariant::UtilityMax;
    std::string text;
    std::string diagram_fingerprint;  // empty for baselines
    std::string objective_rendering;  // empty for baselines

    /// SHA-256 of the exact prompt text.
    std::string fingerprint() const;
};

/// Term of the objective for one chance node, e.g. "P(G1=1 | A=a)" or
/// "E[X2 | X1=1, A=a]".
std::string render_objective_term(const InfluenceDiagram& d, const std::string& node_id);

/// "O(a) = term x term x ..." in declaration_order().
std::string render_objective(const InfluenceDiagram& d);

/// "Let X | A=a be a random variable representing ..." paragraph.
/// `parents` are the node's chance parents (gating conditions).
std::string render_variable_block(const NodeSpec& node, const std::vector<NodeSpec>& parents);

/// Throws Error(Intractable) for intractable diagrams and
/// Error(InvalidArgument) for an empty task description.
PromptArtifact compile_utilitymax_prompt(const TaskSpec& task, const InfluenceDiagram& d);

/// Basic or Harsh natural-language baseline sharing the task, context,
/// candidate pool and response format of the UtilityMax prompt.
PromptArtifact compile_baseline_prompt(const TaskSpec& task, PromptVariant variant);

}  // namespace utilimax
