#pragma once

#include "utilimax/diagram.hpp"
#include "utilimax/utility.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace utilimax {

/// Largest |factorized - brute force| accepted by the oracle check.
inline constexpr double kOracleTolerance = 1e-12;

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
double unit_uniform(std::mt19937_64& rng);

/// Valid random estimates for every chance node: probabilities for binary and
/// internal nodes, a distribution or an in-range scalar for categorical
/// leaves, a scalar in [0, 2) for scalar-expectation leaves.
CandidateEstimates random_estimates(const InfluenceDiagram& d, std::mt19937_64& rng, std::string candidate_id);

struct OracleCheckResult {
    std::size_t trials = 0;
    double max_abs_deviation = 0.0;
    std::uint64_t joint_assignments = 0;
};

/// Runs `trials` random estimate sets through the regime formula and the
/// brute-force joint enumeration. Throws Error(Validation) for invalid
/// diagrams, Error(Intractable) and Error(JointTooLarge) when no comparison
/// is possible.
OracleCheckResult oracle_check(const InfluenceDiagram& d, std::size_t trials, std::uint64_t seed);

}  // namespace utilimax
