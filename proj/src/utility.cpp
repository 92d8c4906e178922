#include "utilimax/utility.hpp"

#include "utilimax/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace utilimax {

namespace {

Error estimate_error(const std::string& msg) { return Error(ErrorCode::Estimate, msg); }

void check_probability(double p, const std::string& node_id) {
    if (!(p >= 0.0 && p <= 1.0)) throw estimate_error("probability out of range: " + node_id);
}

const EstimateEntry& entry_for(const CandidateEstimates& est, const std::string& id) {
    auto it = est.per_node.find(id);
    if (it == est.per_node.end()) throw estimate_error("missing node estimate: " + id);
    return it->second;
}

void check_no_extra(const InfluenceDiagram& d, const CandidateEstimates& est) {
    for (const auto& [id, entry] : est.per_node) {
        const NodeSpec* n = d.find(id);
        if (!n || n->is_decision()) throw estimate_error("unknown node id: " + id);
    }
}

std::vector<double> categorical_probs(const NodeSpec& node, const CategoricalDist& dist) {
    std::vector<double> probs(node.domain.labels.size(), 0.0);
    double total = 0.0;
    for (const auto& [label, p] : dist.probs) {
        auto it = std::find(node.domain.labels.begin(), node.domain.labels.end(), label);
        if (it == node.domain.labels.end()) {
            throw estimate_error("unknown label '" + label + "' for node " + node.id);
        }
        check_probability(p, node.id);
        probs[static_cast<std::size_t>(it - node.domain.labels.begin())] = p;
        total += p;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        throw estimate_error("distribution does not sum to 1: " + node.id);
    }
    return probs;
}

/// Range of f over a finite domain; the expectation of f must fall inside it.
std::pair<double, double> factor_range(const std::vector<double>& values) {
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
}

double checked_scalar(const NodeSpec& node, const ScalarValue& s) {
    if (!std::isfinite(s.v)) throw estimate_error("non-finite expectation: " + node.id);
    if (node.domain.kind == DomainKind::Categorical) {
        auto [lo, hi] = factor_range(factor_values(node));
        // Models report rounded expectations; allow a hair of slack at the ends.
        const double slack = 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
        if (s.v < lo - slack || s.v > hi + slack) {
            throw estimate_error("expectation out of range: " + node.id);
        }
    }
    return s.v;
}

std::string kind_name(const EstimateEntry& e) {
    if (std::holds_alternative<Probability>(e)) return "probability";
    if (std::holds_alternative<CategoricalDist>(e)) return "categorical distribution";
    return "scalar expectation";
}

Error mismatch(const NodeSpec& node, const EstimateEntry& e) {
    return estimate_error("estimate kind mismatch: " + node.id + " (" +
                          std::string(to_string(node.domain.kind)) + " node given a " +
                          kind_name(e) + ")");
}

void require_tag(const InfluenceDiagram& d, StructureTag want, const char* op) {
    auto cls = classify_tractability(d);
    if (cls.tag != want) {
        throw Error(cls.tag == StructureTag::Intractable ? ErrorCode::Intractable
                                                         : ErrorCode::InvalidArgument,
                    std::string(op) + " requires a " + std::string(to_string(want)) +
                        " diagram, got " + std::string(to_string(cls.tag)) + ": " + cls.detail);
    }
}

/// Chance-node ids in topological order. Every product below multiplies in
/// this order, which keeps the regime formulas bitwise comparable.
std::vector<std::string> chance_order(const InfluenceDiagram& d) {
    auto order = topological_order(d);
    order.erase(order.begin());
    return order;
}

}  // namespace

double node_expectation(const NodeSpec& node, const EstimateEntry& entry) {
    switch (node.domain.kind) {
        case DomainKind::Binary: {
            const auto* prob = std::get_if<Probability>(&entry);
            if (!prob) throw mismatch(node, entry);
            check_probability(prob->p, node.id);
            if (node.factor.form == FactorForm::Identity) return prob->p;
            const auto f = factor_values(node);
            return (1.0 - prob->p) * f[0] + prob->p * f[1];
        }
        case DomainKind::Categorical: {
            if (const auto* dist = std::get_if<CategoricalDist>(&entry)) {
                const auto probs = categorical_probs(node, *dist);
                const auto f = factor_values(node);
                double e = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) e += f[i] * probs[i];
                return e;
            }
            if (const auto* s = std::get_if<ScalarValue>(&entry)) return checked_scalar(node, *s);
            throw mismatch(node, entry);
        }
        case DomainKind::ScalarExpectation: {
            const auto* s = std::get_if<ScalarValue>(&entry);
            if (!s) throw mismatch(node, entry);
            const double v = checked_scalar(node, *s);
            return node.factor.form == FactorForm::ConstantOne ? 1.0 : v;
        }
    }
    throw mismatch(node, entry);
}

double expected_utility_ci(const InfluenceDiagram& d, const CandidateEstimates& est) {
    require_tag(d, StructureTag::ConditionallyIndependent, "expected_utility_ci");
    check_no_extra(d, est);
    double product = 1.0;
    for (const auto& id : chance_order(d)) product *= node_expectation(d.at(id), entry_for(est, id));
    return product;
}

double expected_utility_gated(const InfluenceDiagram& d, const CandidateEstimates& est) {
    require_tag(d, StructureTag::BinaryGated, "expected_utility_gated");
    check_no_extra(d, est);
    double product = 1.0;
    for (const auto& id : chance_order(d)) {
        const auto& node = d.at(id);
        const auto& entry = entry_for(est, id);
        if (!d.is_leaf(id)) {
            const auto* prob = std::get_if<Probability>(&entry);
            if (!prob) {
                throw estimate_error("internal node estimate not of Probability kind: " + id);
            }
            check_probability(prob->p, id);
            product *= prob->p;
        } else {
            product *= node_expectation(node, entry);
        }
    }
    return product;
}

double expected_utility_all_binary(const InfluenceDiagram& d, const CandidateEstimates& est) {
    auto cls = classify_tractability(d);
    if (cls.tag == StructureTag::Intractable) {
        throw Error(ErrorCode::Intractable, "expected_utility_all_binary: " + cls.detail);
    }
    check_no_extra(d, est);
    const auto order = chance_order(d);
    for (const auto& id : order) {
        const auto& node = d.at(id);
        if (node.domain.kind != DomainKind::Binary || node.factor.form != FactorForm::Identity) {
            throw Error(ErrorCode::InvalidArgument,
                        "non-binary node present: " + id);
        }
    }
    double product = 1.0;
    for (const auto& id : order) {
        const auto& entry = entry_for(est, id);
        const auto* prob = std::get_if<Probability>(&entry);
        if (!prob) throw mismatch(d.at(id), entry);
        check_probability(prob->p, id);
        product *= prob->p;
    }
    return product;
}

double expected_utility(const InfluenceDiagram& d, const CandidateEstimates& est) {
    auto cls = classify_tractability(d);
    switch (cls.tag) {
        case StructureTag::ConditionallyIndependent: return expected_utility_ci(d, est);
        case StructureTag::BinaryGated: return expected_utility_gated(d, est);
        case StructureTag::Intractable: break;
    }
    throw Error(ErrorCode::Intractable, "diagram is intractable: " + cls.detail);
}

// ---------------------------------------------------------------------------
// Joint model and brute-force oracle

namespace {

/// Outcome values and the active-row distribution for one node.
std::pair<std::vector<double>, std::vector<double>> active_distribution(
    const NodeSpec& node, const EstimateEntry& entry, bool internal) {
    switch (node.domain.kind) {
        case DomainKind::Binary: {
            const auto* prob = std::get_if<Probability>(&entry);
            if (!prob) {
                if (internal) {
                    throw estimate_error("internal node estimate not of Probability kind: " +
                                         node.id);
                }
                throw mismatch(node, entry);
            }
            check_probability(prob->p, node.id);
            return {factor_values(node), {1.0 - prob->p, prob->p}};
        }
        case DomainKind::Categorical: {
            if (internal) {
                throw estimate_error("internal node estimate not of Probability kind: " + node.id);
            }
            const auto values = factor_values(node);
            if (const auto* dist = std::get_if<CategoricalDist>(&entry)) {
                return {values, categorical_probs(node, *dist)};
            }
            if (const auto* s = std::get_if<ScalarValue>(&entry)) {
                // Any distribution with the right mean will do; mix the two
                // extreme outcomes of f.
                const double v = checked_scalar(node, *s);
                const auto lo_it = std::min_element(values.begin(), values.end());
                const auto hi_it = std::max_element(values.begin(), values.end());
                std::vector<double> probs(values.size(), 0.0);
                const double span = *hi_it - *lo_it;
                if (span == 0.0) {
                    probs[0] = 1.0;
                } else {
                    const double w = std::clamp((v - *lo_it) / span, 0.0, 1.0);
                    probs[static_cast<std::size_t>(hi_it - values.begin())] += w;
                    probs[static_cast<std::size_t>(lo_it - values.begin())] += 1.0 - w;
                }
                return {values, probs};
            }
            throw mismatch(node, entry);
        }
        case DomainKind::ScalarExpectation: {
            if (internal) {
                throw estimate_error("internal node estimate not of Probability kind: " + node.id);
            }
            const auto* s = std::get_if<ScalarValue>(&entry);
            if (!s) throw mismatch(node, entry);
            const double v = node.factor.form == FactorForm::ConstantOne ? 1.0
                                                                         : checked_scalar(node, *s);
            return {{0.0, v}, {0.0, 1.0}};
        }
    }
    throw mismatch(node, entry);
}

}  // namespace

JointModel derive_joint_from_estimates(const InfluenceDiagram& d, const CandidateEstimates& est) {
    auto cls = classify_tractability(d);
    if (cls.tag == StructureTag::Intractable) {
        throw Error(ErrorCode::Intractable, "cannot derive a joint: " + cls.detail);
    }
    check_no_extra(d, est);
    const bool gated = cls.tag == StructureTag::BinaryGated;

    JointModel jm;
    for (const auto& id : chance_order(d)) {
        const auto& node = d.at(id);
        const bool internal = gated && !d.is_leaf(id);
        auto [values, active] = active_distribution(node, entry_for(est, id), internal);

        NodeTable table;
        table.node_id = id;
        table.parents = d.chance_parents(id);
        table.values = std::move(values);

        const std::size_t k = table.parents.size();
        // Chance parents in a valid CI/gated diagram are binary.
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
            std::vector<int> key(k);
            bool all_active = true;
            for (std::size_t b = 0; b < k; ++b) {
                key[b] = static_cast<int>((mask >> b) & 1u);
                all_active = all_active && key[b] == 1;
            }
            if (all_active) {
                table.rows[key] = active;
            } else {
                std::vector<double> off(table.values.size(), 0.0);
                off[0] = 1.0;
                table.rows[key] = std::move(off);
            }
        }
        jm.tables.push_back(std::move(table));
    }
    return jm;
}

std::uint64_t joint_size(const JointModel& jm) {
    std::uint64_t size = 1;
    for (const auto& t : jm.tables) {
        const auto n = static_cast<std::uint64_t>(t.values.size());
        if (n != 0 && size > std::numeric_limits<std::uint64_t>::max() / n) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        size *= n;
    }
    return size;
}

namespace {

struct DenseTable {
    std::vector<std::size_t> parent_pos;
    std::vector<std::size_t> radix;
    std::vector<double> values;
    std::vector<std::optional<std::vector<double>>> rows;
};

/// Neumaier-compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

class Enumerator {
public:
    Enumerator(const JointModel& jm, std::vector<DenseTable> tables)
        : jm_(jm), tables_(std::move(tables)), assignment_(tables_.size(), 0) {}

    double run() {
        visit(0, 1.0, 1.0);
        return acc_.value();
    }

private:
    void visit(std::size_t depth, double prob, double utility) {
        if (depth == tables_.size()) {
            acc_.add(prob * utility);
            return;
        }
        const auto& t = tables_[depth];
        std::size_t row = 0;
        for (std::size_t i = 0; i < t.parent_pos.size(); ++i) {
            row = row * t.radix[i] + static_cast<std::size_t>(assignment_[t.parent_pos[i]]);
        }
        const auto& dist = t.rows[row];
        if (!dist) {
            throw Error(ErrorCode::InvalidArgument,
                        "CPT row missing for a reachable parent assignment of " +
                            jm_.tables[depth].node_id);
        }
        for (std::size_t x = 0; x < t.values.size(); ++x) {
            const double p = (*dist)[x];
            if (p == 0.0) continue;
            assignment_[depth] = static_cast<int>(x);
            visit(depth + 1, prob * p, utility * t.values[x]);
        }
    }

    const JointModel& jm_;
    std::vector<DenseTable> tables_;
    std::vector<int> assignment_;
    CompensatedSum acc_;
};

}  // namespace

double brute_force_eu(const InfluenceDiagram& d, const JointModel& jm) {
    const auto size = joint_size(jm);
    if (size > kMaxJointAssignments) {
        throw Error(ErrorCode::JointTooLarge,
                    "joint too large: " +
                        (size == std::numeric_limits<std::uint64_t>::max()
                             ? std::string("overflow")
                             : std::to_string(size)) +
                        " assignments exceed the limit of " + std::to_string(kMaxJointAssignments));
    }

    const auto chance = d.chance_ids();
    std::set<std::string> expected(chance.begin(), chance.end());
    std::set<std::string> present;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < jm.tables.size(); ++i) {
        const auto& id = jm.tables[i].node_id;
        if (!present.insert(id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate table for node " + id);
        }
        position[id] = i;
    }
    if (present != expected) {
        throw Error(ErrorCode::InvalidArgument, "joint model must hold one table per chance node");
    }

    std::vector<DenseTable> dense;
    dense.reserve(jm.tables.size());
    for (std::size_t i = 0; i < jm.tables.size(); ++i) {
        const auto& t = jm.tables[i];
        if (t.values.empty()) {
            throw Error(ErrorCode::InvalidArgument, "node " + t.node_id + " has no outcomes");
        }
        DenseTable dt;
        dt.values = t.values;
        std::size_t rows = 1;
        for (const auto& p : t.parents) {
            auto it = position.find(p);
            if (it == position.end() || it->second >= i) {
                throw Error(ErrorCode::InvalidArgument,
                            "parent " + p + " of " + t.node_id + " must precede it");
            }
            dt.parent_pos.push_back(it->second);
            dt.radix.push_back(jm.tables[it->second].values.size());
            rows *= dt.radix.back();
        }
        dt.rows.resize(rows);
        for (const auto& [key, dist] : t.rows) {
            if (key.size() != t.parents.size()) {
                throw Error(ErrorCode::InvalidArgument, "CPT key arity mismatch for " + t.node_id);
            }
            std::size_t row = 0;
            for (std::size_t k = 0; k < key.size(); ++k) {
                if (key[k] < 0 || static_cast<std::size_t>(key[k]) >= dt.radix[k]) {
                    throw Error(ErrorCode::InvalidArgument, "CPT key out of range for " + t.node_id);
                }
                row = row * dt.radix[k] + static_cast<std::size_t>(key[k]);
            }
            if (dist.size() != t.values.size()) {
                throw Error(ErrorCode::InvalidArgument, "CPT row width mismatch for " + t.node_id);
            }
            double total = 0.0;
            for (double p : dist) {
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw Error(ErrorCode::InvalidArgument,
                                "CPT probability out of range for " + t.node_id);
                }
                total += p;
            }
            if (std::abs(total - 1.0) > kCptRowTolerance) {
                throw Error(ErrorCode::InvalidArgument, "CPT row does not sum to 1 for " + t.node_id);
            }
            dt.rows[row] = dist;
        }
        dense.push_back(std::move(dt));
    }
    return Enumerator(jm, std::move(dense)).run();
}

SelectionResult select_optimal(const std::vector<CandidateEstimates>& results) {
    if (results.empty()) throw Error(ErrorCode::InvalidArgument, "empty candidate list");
    std::set<std::string> ids;
    SelectionResult out;
    for (const auto& c : results) {
        if (!c.objective) {
            throw Error(ErrorCode::InvalidArgument, "candidate " + c.candidate_id +
                                                        " has no computed objective");
        }
        if (std::isnan(*c.objective)) {
            throw Error(ErrorCode::InvalidArgument, "candidate " + c.candidate_id +
                                                        " has a NaN objective");
        }
        if (!ids.insert(c.candidate_id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate candidate id: " + c.candidate_id);
        }
        out.ranked.emplace_back(c.candidate_id, *c.objective);
    }
    std::sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    out.best_candidate_id = out.ranked.front().first;

    std::ostringstream note;
    bool any_tie = false;
    for (std::size_t i = 0; i < out.ranked.size();) {
        std::size_t j = i + 1;
        while (j < out.ranked.size() && out.ranked[j].second == out.ranked[i].second) ++j;
        if (j - i > 1) {
            note << (any_tie ? "; " : "") << "exact tie at " << out.ranked[i].second << " between ";
            for (std::size_t k = i; k < j; ++k) note << (k > i ? ", " : "") << out.ranked[k].first;
            any_tie = true;
        }
        i = j;
    }
    if (any_tie) out.tie_note = note.str() + " (broken by ascending candidate id)";
    return out;
}

}  // namespace utilimax
