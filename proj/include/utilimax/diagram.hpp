#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace utilimax {

enum class NodeKind { Decision, Chance };

enum class DomainKind { Binary, Categorical, ScalarExpectation };

/// Value space of a chance node. Categorical labels carry explicit numeric
/// scores; Binary nodes implicitly use labels "0" and "1".
struct Domain {
    DomainKind kind = DomainKind::Binary;
    std::vector<std::string> labels;
    std::vector<double> scores;

    static Domain binary() { return {}; }
    static Domain categorical(std::vector<std::string> labels, std::vector<double> scores) {
        return {DomainKind::Categorical, std::move(labels), std::move(scores)};
    }
    static Domain scalar_expectation() { return {DomainKind::ScalarExpectation, {}, {}}; }

    bool operator==(const Domain&) const = default;
};

enum class FactorForm { Identity, ScoreMap, ConstantOne };

/// Per-node utility factor f_i. Identity on a Categorical node means "use the
/// domain scores"; ScoreMap overrides them label by label.
struct FactorSpec {
    FactorForm form = FactorForm::Identity;
    std::map<std::string, double> score_map;

    bool operator==(const FactorSpec&) const = default;
};

struct NodeSpec {
    std::string id;
    NodeKind kind = NodeKind::Chance;
    Domain domain;
    std::string description;
    FactorSpec factor;

    bool is_decision() const noexcept { return kind == NodeKind::Decision; }
    bool operator==(const NodeSpec&) const = default;
};

struct Edge {
    std::string parent;
    std::string child;

    bool operator==(const Edge&) const = default;
};

/// One decision node, chance nodes, and parent->child edges. The utility node
/// is implicit: U is the product of every chance node's factor.
///
/// Construction never rejects structurally broken graphs (cycles, duplicate
/// ids, ...); validate_structure() reports those. Values are immutable.
class InfluenceDiagram {
public:
    InfluenceDiagram() = default;
    InfluenceDiagram(std::string task, std::vector<NodeSpec> nodes, std::vector<Edge> edges);

    const std::string& task() const noexcept { return task_; }
    const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    /// First node with this id, or nullptr.
    const NodeSpec* find(std::string_view id) const;
    const NodeSpec& at(std::string_view id) const;

    /// Id of the first Decision node; empty when there is none.
    std::string decision_id() const;
    std::vector<std::string> chance_ids() const;

    /// Parents / children in edge-list order, duplicates removed.
    std::vector<std::string> parents(std::string_view id) const;
    std::vector<std::string> children(std::string_view id) const;
    /// Parents that are chance nodes.
    std::vector<std::string> chance_parents(std::string_view id) const;
    bool is_leaf(std::string_view id) const;

    bool operator==(const InfluenceDiagram&) const = default;

private:
    std::string task_;
    std::vector<NodeSpec> nodes_;
    std::vector<Edge> edges_;
};

struct Violation {
    std::string rule;
    std::string message;
    std::vector<std::string> subjects;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    bool has(std::string_view rule) const;
};

enum class StructureTag { ConditionallyIndependent, BinaryGated, Intractable };

struct StructureClass {
    StructureTag tag = StructureTag::Intractable;
    std::string detail;
};

std::string_view to_string(StructureTag tag);
std::string_view to_string(DomainKind kind);

/// Parses the JSON diagram document (keys `task`, `nodes`, `edges`). Unknown
/// keys, unknown kinds/domains and dangling edge references are errors.
InfluenceDiagram parse_diagram_spec(std::string_view text);
InfluenceDiagram load_diagram_file(const std::filesystem::path& path);

/// Canonical JSON encoding; parse_diagram_spec(serialize_diagram(d)) == d.
std::string serialize_diagram(const InfluenceDiagram& d);

/// SHA-256 of the canonical encoding, hex.
std::string diagram_fingerprint(const InfluenceDiagram& d);

ValidationReport validate_structure(const InfluenceDiagram& d);

/// Throws Error(Validation) when the diagram does not validate.
StructureClass classify_tractability(const InfluenceDiagram& d);

/// Kahn's algorithm with a lexicographic ready set, so the decision node comes
/// first and the order is stable. Throws Error(Validation) on invalid input.
std::vector<std::string> topological_order(const InfluenceDiagram& d);

/// Topological order with ties broken by position in the node list instead of
/// by id. Prompts use it so variables appear in the order the author wrote them.
std::vector<std::string> declaration_order(const InfluenceDiagram& d);

/// Graphviz rendering, including the implicit utility node U.
std::string to_dot(const InfluenceDiagram& d);

/// Utility value f(outcome) for each outcome of a finite-domain chance node:
/// Binary -> {f(0), f(1)}, Categorical -> one per label.
std::vector<double> factor_values(const NodeSpec& node);

}  // namespace utilimax
