#include "utilimax/diagram.hpp"

#include "json_util.hpp"
#include "utilimax/error.hpp"
#include "utilimax/hash.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace utilimax {

using detail::json;

namespace {

constexpr ErrorCode kParse = ErrorCode::Parse;

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

// ---------------------------------------------------------------------------
// InfluenceDiagram

InfluenceDiagram::InfluenceDiagram(std::string task, std::vector<NodeSpec> nodes,
                                   std::vector<Edge> edges)
    : task_(std::move(task)), nodes_(std::move(nodes)), edges_(std::move(edges)) {}

const NodeSpec* InfluenceDiagram::find(std::string_view id) const {
    for (const auto& n : nodes_) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

const NodeSpec& InfluenceDiagram::at(std::string_view id) const {
    const NodeSpec* n = find(id);
    if (!n) throw Error(ErrorCode::InvalidArgument, "unknown node id: " + std::string(id));
    return *n;
}

std::string InfluenceDiagram::decision_id() const {
    for (const auto& n : nodes_) {
        if (n.is_decision()) return n.id;
    }
    return {};
}

std::vector<std::string> InfluenceDiagram::chance_ids() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        if (!n.is_decision()) out.push_back(n.id);
    }
    return out;
}

std::vector<std::string> InfluenceDiagram::parents(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& e : edges_) {
        if (e.child == id) push_unique(out, e.parent);
    }
    return out;
}

std::vector<std::string> InfluenceDiagram::children(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& e : edges_) {
        if (e.parent == id) push_unique(out, e.child);
    }
    return out;
}

std::vector<std::string> InfluenceDiagram::chance_parents(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& p : parents(id)) {
        const NodeSpec* n = find(p);
        if (n && !n->is_decision()) out.push_back(p);
    }
    return out;
}

bool InfluenceDiagram::is_leaf(std::string_view id) const {
    return std::none_of(edges_.begin(), edges_.end(),
                        [&](const Edge& e) { return e.parent == id; });
}

bool ValidationReport::has(std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.rule == rule; });
}

std::string_view to_string(StructureTag tag) {
    switch (tag) {
        case StructureTag::ConditionallyIndependent: return "ConditionallyIndependent";
        case StructureTag::BinaryGated: return "BinaryGated";
        case StructureTag::Intractable: return "Intractable";
    }
    return "?";
}

std::string_view to_string(DomainKind kind) {
    switch (kind) {
        case DomainKind::Binary: return "binary";
        case DomainKind::Categorical: return "categorical";
        case DomainKind::ScalarExpectation: return "scalar_expectation";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

FactorSpec parse_factor(const json& j, const std::string& where) {
    FactorSpec f;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "identity") {
            f.form = FactorForm::Identity;
        } else if (s == "constant_one") {
            f.form = FactorForm::ConstantOne;
        } else {
            throw Error(kParse, where + ": unknown factor form '" + s + "'");
        }
        return f;
    }
    if (j.is_object()) {
        detail::reject_unknown_keys(j, {"score_map"}, where, kParse);
        auto it = j.find("score_map");
        if (it == j.end() || !it->is_object()) {
            throw Error(kParse, where + ": score_map must be an object of label -> number");
        }
        f.form = FactorForm::ScoreMap;
        for (const auto& item : it->items()) {
            if (!item.value().is_number()) {
                throw Error(kParse, where + ".score_map." + item.key() + ": expected a number");
            }
            f.score_map[item.key()] = item.value().get<double>();
        }
        return f;
    }
    throw Error(kParse, where + ": factor must be a string or an object");
}

NodeSpec parse_node(const json& j, const std::string& where) {
    detail::require_object(j, where, kParse);
    detail::reject_unknown_keys(
        j, {"id", "kind", "domain", "labels", "scores", "description", "factor"}, where, kParse);

    NodeSpec n;
    n.id = detail::get_string(j, "id", where, kParse);
    const auto kind = detail::get_string(j, "kind", where, kParse);
    n.description = detail::get_string_or(j, "description", "", where, kParse);

    if (kind == "decision") {
        n.kind = NodeKind::Decision;
        for (const char* key : {"domain", "labels", "scores", "factor"}) {
            if (j.contains(key)) {
                throw Error(kParse, where + ": decision node does not take '" + key + "'");
            }
        }
        return n;
    }
    if (kind != "chance") throw Error(kParse, where + ": unknown node kind '" + kind + "'");
    n.kind = NodeKind::Chance;

    const auto domain = detail::get_string(j, "domain", where, kParse);
    if (domain == "binary") {
        n.domain = Domain::binary();
    } else if (domain == "categorical") {
        n.domain.kind = DomainKind::Categorical;
    } else if (domain == "scalar_expectation") {
        n.domain = Domain::scalar_expectation();
    } else {
        throw Error(kParse, where + ": unknown domain '" + domain + "'");
    }

    if (n.domain.kind != DomainKind::Categorical) {
        if (j.contains("labels") || j.contains("scores")) {
            throw Error(kParse, where + ": labels/scores are only valid for categorical domains");
        }
    } else {
        auto lit = j.find("labels");
        if (lit == j.end() || !lit->is_array()) {
            throw Error(kParse, where + ": categorical domain requires a 'labels' array");
        }
        for (const auto& l : *lit) {
            if (!l.is_string()) throw Error(kParse, where + ".labels: expected strings");
            n.domain.labels.push_back(l.get<std::string>());
        }
        auto sit = j.find("scores");
        if (sit != j.end()) {
            if (!sit->is_array()) throw Error(kParse, where + ".scores: expected an array");
            for (const auto& s : *sit) {
                if (!s.is_number()) throw Error(kParse, where + ".scores: expected numbers");
                n.domain.scores.push_back(s.get<double>());
            }
            if (n.domain.scores.size() != n.domain.labels.size()) {
                throw Error(kParse, where + ": labels and scores differ in length");
            }
        } else {
            // Numeric labels double as their own scores ("1".."5" -> 1.0..5.0).
            for (const auto& label : n.domain.labels) {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(label, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used == 0 || used != label.size()) {
                    throw Error(kParse, where + ": label '" + label +
                                            "' is not numeric; 'scores' must be given");
                }
                n.domain.scores.push_back(v);
            }
        }
    }

    if (j.contains("factor")) n.factor = parse_factor(j.at("factor"), where + ".factor");
    return n;
}

}  // namespace

InfluenceDiagram parse_diagram_spec(std::string_view text) {
    const json doc = detail::parse_json_text(text);
    detail::require_object(doc, "document", kParse);
    detail::reject_unknown_keys(doc, {"task", "nodes", "edges"}, "document", kParse);

    std::string task = detail::get_string_or(doc, "task", "", "document", kParse);

    auto nit = doc.find("nodes");
    if (nit == doc.end() || !nit->is_array()) {
        throw Error(kParse, "document: 'nodes' must be an array");
    }
    std::vector<NodeSpec> nodes;
    for (std::size_t i = 0; i < nit->size(); ++i) {
        nodes.push_back(parse_node((*nit)[i], "nodes[" + std::to_string(i) + "]"));
    }

    std::vector<Edge> edges;
    if (auto eit = doc.find("edges"); eit != doc.end()) {
        if (!eit->is_array()) throw Error(kParse, "document: 'edges' must be an array");
        std::set<std::string> ids;
        for (const auto& n : nodes) ids.insert(n.id);
        for (std::size_t i = 0; i < eit->size(); ++i) {
            const auto& e = (*eit)[i];
            const std::string where = "edges[" + std::to_string(i) + "]";
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
                throw Error(kParse, where + ": expected [parent, child]");
            }
            Edge edge{e[0].get<std::string>(), e[1].get<std::string>()};
            for (const auto& end : {edge.parent, edge.child}) {
                if (!ids.count(end)) throw Error(kParse, "dangling edge reference: " + end);
            }
            edges.push_back(std::move(edge));
        }
    } else {
        throw Error(kParse, "document: missing key 'edges'");
    }
    return InfluenceDiagram(std::move(task), std::move(nodes), std::move(edges));
}

InfluenceDiagram load_diagram_file(const std::filesystem::path& path) {
    return parse_diagram_spec(detail::read_text_file(path));
}

std::string serialize_diagram(const InfluenceDiagram& d) {
    nlohmann::ordered_json doc;
    doc["task"] = d.task();
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : d.nodes()) {
        nlohmann::ordered_json j;
        j["id"] = n.id;
        if (n.is_decision()) {
            j["kind"] = "decision";
            if (!n.description.empty()) j["description"] = n.description;
            doc["nodes"].push_back(std::move(j));
            continue;
        }
        j["kind"] = "chance";
        j["domain"] = std::string(to_string(n.domain.kind));
        if (n.domain.kind == DomainKind::Categorical) {
            j["labels"] = n.domain.labels;
            j["scores"] = n.domain.scores;
        }
        j["description"] = n.description;
        switch (n.factor.form) {
            case FactorForm::Identity: j["factor"] = "identity"; break;
            case FactorForm::ConstantOne: j["factor"] = "constant_one"; break;
            case FactorForm::ScoreMap: {
                nlohmann::ordered_json m = nlohmann::ordered_json::object();
                for (const auto& [label, v] : n.factor.score_map) m[label] = v;
                j["factor"] = {{"score_map", m}};
                break;
            }
        }
        doc["nodes"].push_back(std::move(j));
    }
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : d.edges()) doc["edges"].push_back({e.parent, e.child});
    return doc.dump(2) + "\n";
}

std::string diagram_fingerprint(const InfluenceDiagram& d) {
    return sha256_hex(serialize_diagram(d));
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::vector<std::string> binary_labels() { return {"0", "1"}; }

void check_node_domain(const NodeSpec& n, bool leaf, ValidationReport& r) {
    if (n.description.empty()) {
        r.violations.push_back({"chance-description",
                                "chance node '" + n.id + "' has an empty description",
                                {n.id}});
    }
    const auto& dom = n.domain;
    if (dom.kind == DomainKind::Categorical) {
        if (dom.labels.size() < 2) {
            r.violations.push_back({"categorical-labels",
                                    "categorical node '" + n.id + "' needs at least 2 labels",
                                    {n.id}});
        }
        if (dom.labels.size() != dom.scores.size()) {
            r.violations.push_back({"categorical-labels",
                                    "categorical node '" + n.id + "' has " +
                                        std::to_string(dom.labels.size()) + " labels but " +
                                        std::to_string(dom.scores.size()) + " scores",
                                    {n.id}});
        }
        std::set<std::string> labels(dom.labels.begin(), dom.labels.end());
        if (labels.size() != dom.labels.size()) {
            r.violations.push_back({"categorical-labels",
                                    "categorical node '" + n.id + "' repeats a label", {n.id}});
        }
        std::set<double> scores(dom.scores.begin(), dom.scores.end());
        if (scores.size() != dom.scores.size()) {
            r.violations.push_back({"categorical-labels",
                                    "categorical node '" + n.id + "' has non-distinct scores",
                                    {n.id}});
        }
        if (std::any_of(dom.scores.begin(), dom.scores.end(),
                        [](double s) { return !std::isfinite(s); })) {
            r.violations.push_back({"categorical-labels",
                                    "categorical node '" + n.id + "' has a non-finite score",
                                    {n.id}});
        }
    }

    const auto& f = n.factor;
    if (!leaf && dom.kind == DomainKind::Binary && f.form != FactorForm::Identity) {
        r.violations.push_back({"factor-internal-identity",
                                "internal binary node '" + n.id + "' must use the identity factor",
                                {n.id}});
    }
    if (f.form == FactorForm::ScoreMap) {
        if (!leaf) {
            r.violations.push_back({"factor-score-map-leaf",
                                    "score_map factor on non-leaf node '" + n.id + "'", {n.id}});
        }
        if (dom.kind == DomainKind::ScalarExpectation) {
            r.violations.push_back({"factor-domain",
                                    "scalar_expectation node '" + n.id +
                                        "' cannot take a score_map factor",
                                    {n.id}});
        } else {
            const auto labels =
                dom.kind == DomainKind::Binary ? binary_labels() : dom.labels;
            std::set<std::string> want(labels.begin(), labels.end());
            std::set<std::string> have;
            for (const auto& [label, v] : f.score_map) {
                have.insert(label);
                if (!std::isfinite(v)) {
                    r.violations.push_back({"factor-score-map-labels",
                                            "score_map of '" + n.id + "' has a non-finite value",
                                            {n.id}});
                }
            }
            if (want != have) {
                r.violations.push_back({"factor-score-map-labels",
                                        "score_map of '" + n.id +
                                            "' must list exactly the domain labels",
                                        {n.id}});
            }
        }
    }
}

}  // namespace

ValidationReport validate_structure(const InfluenceDiagram& d) {
    ValidationReport r;
    const auto& nodes = d.nodes();

    std::map<std::string, int> id_count;
    for (const auto& n : nodes) ++id_count[n.id];
    for (const auto& [id, count] : id_count) {
        if (id.empty()) r.violations.push_back({"empty-id", "node with an empty id", {}});
        if (count > 1) {
            r.violations.push_back({"unique-ids", "duplicate node id '" + id + "'", {id}});
        }
    }

    std::vector<std::string> decisions;
    for (const auto& n : nodes) {
        if (n.is_decision()) decisions.push_back(n.id);
    }
    if (decisions.size() != 1) {
        r.violations.push_back({"singular-decision-root",
                                "expected exactly one decision node, found " +
                                    std::to_string(decisions.size()),
                                decisions});
    }
    if (d.chance_ids().empty()) {
        r.violations.push_back({"chance-nodes", "diagram needs at least one chance node", {}});
    }

    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : d.edges()) {
        for (const auto& end : {e.parent, e.child}) {
            if (!id_count.count(end)) {
                r.violations.push_back(
                    {"edge-endpoint", "dangling edge reference: " + end, {e.parent, e.child}});
            }
        }
        if (e.parent == e.child) {
            r.violations.push_back({"self-edge", "self-edge on '" + e.parent + "'", {e.parent}});
        }
        if (!seen.insert({e.parent, e.child}).second) {
            r.violations.push_back({"duplicate-edge",
                                    "duplicate edge " + e.parent + " -> " + e.child,
                                    {e.parent, e.child}});
        }
    }

    for (const auto& dec : decisions) {
        auto ps = d.parents(dec);
        if (!ps.empty()) {
            ps.insert(ps.begin(), dec);
            r.violations.push_back(
                {"decision-no-parents", "decision node '" + dec + "' has parents", ps});
        }
    }

    // Cycle detection over known ids (Kahn); nodes left over sit on or behind a cycle.
    {
        std::map<std::string, int> indeg;
        for (const auto& [id, c] : id_count) indeg[id] = 0;
        std::set<std::pair<std::string, std::string>> unique_edges;
        for (const auto& e : d.edges()) {
            if (indeg.count(e.parent) && indeg.count(e.child)) unique_edges.insert({e.parent, e.child});
        }
        for (const auto& [p, c] : unique_edges) ++indeg[c];
        std::vector<std::string> ready;
        for (const auto& [id, deg] : indeg) {
            if (deg == 0) ready.push_back(id);
        }
        std::size_t done = 0;
        while (!ready.empty()) {
            auto id = ready.back();
            ready.pop_back();
            ++done;
            for (const auto& [p, c] : unique_edges) {
                if (p == id && --indeg[c] == 0) ready.push_back(c);
            }
        }
        if (done != indeg.size()) {
            std::vector<std::string> stuck;
            for (const auto& [id, deg] : indeg) {
                if (deg > 0) stuck.push_back(id);
            }
            r.violations.push_back({"acyclicity", "graph contains a cycle", stuck});
        }
    }

    if (decisions.size() == 1) {
        std::set<std::string> reached{decisions.front()};
        std::vector<std::string> stack{decisions.front()};
        while (!stack.empty()) {
            auto id = stack.back();
            stack.pop_back();
            for (const auto& c : d.children(id)) {
                if (reached.insert(c).second) stack.push_back(c);
            }
        }
        for (const auto& n : nodes) {
            if (!n.is_decision() && !reached.count(n.id)) {
                r.violations.push_back({"reachability",
                                        "chance node '" + n.id +
                                            "' is not reachable from the decision node",
                                        {n.id}});
            }
        }
    }

    for (const auto& n : nodes) {
        if (!n.is_decision()) check_node_domain(n, d.is_leaf(n.id), r);
    }
    return r;
}

namespace {

void require_valid(const InfluenceDiagram& d, const char* what) {
    auto report = validate_structure(d);
    if (!report.ok()) {
        throw Error(ErrorCode::Validation, std::string(what) + " requires a valid diagram: " +
                                               report.violations.front().message);
    }
}

}  // namespace

std::vector<std::string> topological_order(const InfluenceDiagram& d) {
    require_valid(d, "topological_order");
    std::map<std::string, int> indeg;
    for (const auto& n : d.nodes()) indeg[n.id] = 0;
    for (const auto& e : d.edges()) ++indeg[e.child];

    std::set<std::string> ready;
    for (const auto& [id, deg] : indeg) {
        if (deg == 0) ready.insert(id);
    }
    std::vector<std::string> order;
    order.reserve(indeg.size());
    while (!ready.empty()) {
        auto id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const auto& e : d.edges()) {
            if (e.parent == id && --indeg[e.child] == 0) ready.insert(e.child);
        }
    }
    return order;
}

std::vector<std::string> declaration_order(const InfluenceDiagram& d) {
    require_valid(d, "declaration_order");
    const auto& nodes = d.nodes();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
    std::vector<int> indeg(nodes.size(), 0);
    for (const auto& e : d.edges()) ++indeg[index[e.child]];

    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (indeg[i] == 0) ready.insert(i);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        const auto i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(nodes[i].id);
        for (const auto& e : d.edges()) {
            if (e.parent == nodes[i].id) {
                const auto c = index[e.child];
                if (--indeg[c] == 0) ready.insert(c);
            }
        }
    }
    return order;
}

StructureClass classify_tractability(const InfluenceDiagram& d) {
    require_valid(d, "classify_tractability");
    const auto decision = d.decision_id();
    const auto order = topological_order(d);

    bool conditionally_independent = true;
    for (const auto& id : order) {
        if (id == decision) continue;
        const auto ps = d.parents(id);
        if (ps.size() != 1 || ps.front() != decision) {
            conditionally_independent = false;
            break;
        }
    }
    if (conditionally_independent) {
        return {StructureTag::ConditionallyIndependent,
                "every chance node depends only on the decision node"};
    }

    for (const auto& id : order) {
        if (id == decision || d.is_leaf(id)) continue;
        const auto& n = d.at(id);
        if (n.domain.kind != DomainKind::Binary) {
            return {StructureTag::Intractable,
                    "internal node " + id + " is " + std::string(to_string(n.domain.kind)) +
                        ", not binary"};
        }
        if (n.factor.form != FactorForm::Identity) {
            return {StructureTag::Intractable,
                    "internal node " + id + " does not use the identity factor"};
        }
    }
    return {StructureTag::BinaryGated,
            "every internal chance node is binary with the identity factor"};
}

std::string to_dot(const InfluenceDiagram& d) {
    std::ostringstream os;
    os << "digraph influence_diagram {\n";
    os << "  rankdir=TB;\n";
    for (const auto& n : d.nodes()) {
        os << "  \"" << n.id << "\" [shape=" << (n.is_decision() ? "box" : "ellipse") << "];\n";
    }
    os << "  \"U\" [shape=diamond, label=\"U\"];\n";
    for (const auto& e : d.edges()) {
        os << "  \"" << e.parent << "\" -> \"" << e.child << "\";\n";
    }
    for (const auto& n : d.nodes()) {
        if (!n.is_decision()) os << "  \"" << n.id << "\" -> \"U\";\n";
    }
    os << "}\n";
    return os.str();
}

std::vector<double> factor_values(const NodeSpec& node) {
    const auto& f = node.factor;
    auto from_map = [&](const std::vector<std::string>& labels) {
        std::vector<double> out;
        for (const auto& l : labels) {
            auto it = f.score_map.find(l);
            if (it == f.score_map.end()) {
                throw Error(ErrorCode::Validation,
                            "score_map of '" + node.id + "' lacks label '" + l + "'");
            }
            out.push_back(it->second);
        }
        return out;
    };
    switch (node.domain.kind) {
        case DomainKind::Binary:
            if (f.form == FactorForm::Identity) return {0.0, 1.0};
            if (f.form == FactorForm::ConstantOne) return {1.0, 1.0};
            return from_map(binary_labels());
        case DomainKind::Categorical:
            if (f.form == FactorForm::Identity) return node.domain.scores;
            if (f.form == FactorForm::ConstantOne) {
                return std::vector<double>(node.domain.labels.size(), 1.0);
            }
            return from_map(node.domain.labels);
        case DomainKind::ScalarExpectation:
            break;
    }
    throw Error(ErrorCode::InvalidArgument,
                "node '" + node.id + "' has no finite domain");
}

}  // namespace utilimax
