#include "utilimax/oracle.hpp"

#include "utilimax/error.hpp"

#include <algorithm>
#include <cmath>

namespace utilimax {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

CandidateEstimates random_estimates(const InfluenceDiagram& d, std::mt19937_64& rng, std::string candidate_id) {
    CandidateEstimates est;
    est.candidate_id = std::move(candidate_id);
    for (const auto& id : topological_order(d)) {
        const auto& node = d.at(id);
        if (node.is_decision()) continue;
        if (node.domain.kind == DomainKind::Binary || !d.is_leaf(id)) {
            est.per_node[id] = Probability{unit_uniform(rng)};
        } else if (node.domain.kind == DomainKind::Categorical) {
            if (rng() & 1) {
                CategoricalDist dist;
                std::vector<double> w(node.domain.labels.size());
                double total = 0.0;
                for (auto& x : w) total += (x = unit_uniform(rng) + 1e-3);
                for (std::size_t i = 0; i < w.size(); ++i) dist.probs[node.domain.labels[i]] = w[i] / total;
                est.per_node[id] = dist;
            } else {
                const auto f = factor_values(node);
                const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
                est.per_node[id] = ScalarValue{*lo + unit_uniform(rng) * (*hi - *lo)};
            }
        } else {
            est.per_node[id] = ScalarValue{2.0 * unit_uniform(rng)};
        }
    }
    return est;
}

OracleCheckResult oracle_check(const InfluenceDiagram& d, std::size_t trials, std::uint64_t seed) {
    const auto report = validate_structure(d);
    if (!report.ok()) throw Error(ErrorCode::Validation, report.violations.front().message);
    const auto cls = classify_tractability(d);
    if (cls.tag == StructureTag::Intractable) throw Error(ErrorCode::Intractable, cls.detail);

    std::mt19937_64 rng(seed);
    OracleCheckResult r;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto est = random_estimates(d, rng, "trial" + std::to_string(t));
        const auto joint = derive_joint_from_estimates(d, est);
        r.joint_assignments = joint_size(joint);
        const double brute = brute_force_eu(d, joint);
        const double factorized = expected_utility(d, est);
        r.max_abs_deviation = std::max(r.max_abs_deviation, std::abs(factorized - brute));
        ++r.trials;
    }
    return r;
}

}  // namespace utilimax
