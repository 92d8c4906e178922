#pragma once

#include "utilimax/diagram.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace utilimax {

/// P(X=1 | ...), must lie in [0, 1].
struct Probability {
    double p = 0.0;
    bool operator==(const Probability&) const = default;
};

/// Full distribution over a Categorical node's labels; must sum to 1 within 1e-6.
struct CategoricalDist {
    std::map<std::string, double> probs;
    bool operator==(const CategoricalDist&) const = default;
};

/// Directly elicited E[f(X) | ...].
struct ScalarValue {
    double v = 0.0;
    bool operator==(const ScalarValue&) const = default;
};

using EstimateEntry = std::variant<Probability, CategoricalDist, ScalarValue>;

struct CandidateEstimates {
    std::string candidate_id;
    std::string answer_text;
    std::map<std::string, EstimateEntry> per_node;
    std::optional<double> objective;

    bool operator==(const CandidateEstimates&) const = default;
};

/// Conditional probability table of one chance node with the decision fixed to
/// a single candidate. Rows are keyed by the outcome indices of the node's
/// chance parents (empty key when the only parent is the decision node).
struct NodeTable {
    std::string node_id;
    std::vector<std::string> parents;
    std::vector<double> values;  // f(outcome)
    std::map<std::vector<int>, std::vector<double>> rows;
};

/// Tables in topological order.
struct JointModel {
    std::vector<NodeTable> tables;
};

struct SelectionResult {
    std::string best_candidate_id;
    std::vector<std::pair<std::string, double>> ranked;
    std::optional<std::string> tie_note;
};

inline constexpr std::uint64_t kMaxJointAssignments = std::uint64_t{1} << 20;
inline constexpr double kDistributionTolerance = 1e-6;
inline constexpr double kCptRowTolerance = 1e-12;

/// E[f(X) | conditioning] for one chance node from its elicited entry.
/// Validates the entry against the node's domain (kind and range).
double node_expectation(const NodeSpec& node, const EstimateEntry& entry);

/// prod_i E[f_i(X_i) | A=a]. Requires a ConditionallyIndependent diagram.
double expected_utility_ci(const InfluenceDiagram& d, const CandidateEstimates& est);

/// prod_{internal} P(X_i=1 | pa=1, a) * prod_{leaf} E[f_j | pa=1, a].
/// Requires a BinaryGated diagram.
double expected_utility_gated(const InfluenceDiagram& d, const CandidateEstimates& est);

/// prod_i P(X_i=1 | pa=1, a). Every chance node must be Binary with Identity.
double expected_utility_all_binary(const InfluenceDiagram& d, const CandidateEstimates& est);

/// Dispatches on classify_tractability(d); Intractable diagrams throw.
double expected_utility(const InfluenceDiagram& d, const CandidateEstimates& est);

/// Builds CPTs such that brute_force_eu reproduces the factorized value:
/// CI nodes get a single row, gated nodes get the deterministic zero rows
/// plus the elicited all-parents-active row. Scalar expectations become the
/// two-point outcome set {0, v}.
JointModel derive_joint_from_estimates(const InfluenceDiagram& d, const CandidateEstimates& est);

/// Number of full assignments of the joint (saturates at UINT64_MAX).
std::uint64_t joint_size(const JointModel& jm);

/// Sum over every full assignment of P(x) * prod_i f_i(x_i).
/// Throws Error(JointTooLarge) beyond kMaxJointAssignments.
double brute_force_eu(const InfluenceDiagram& d, const JointModel& jm);

/// Descending by objective; exact ties by ascending candidate id.
SelectionResult select_optimal(const std::vector<CandidateEstimates>& results);

}  // namespace utilimax
