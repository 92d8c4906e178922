#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace utilimax {

struct WilcoxonResult {
    /// P(W+ >= observed) under H0; empty when every difference is zero.
    std::optional<double> p_value;
    std::size_t n_used = 0;  // non-zero differences
    double w_plus = 0.0;
    bool exact = false;
    std::string note;
};

/// Largest n (after dropping zero differences) handled by the exact null
/// distribution; above it a tie- and continuity-corrected normal
/// approximation is used.
inline constexpr std::size_t kWilcoxonExactMaxN = 25;

/// One-sided paired signed-rank test of H1: x > y. Zero differences are
/// dropped and tied |differences| share midranks. Requires |x| = |y| >= 5.
WilcoxonResult wilcoxon_one_sided_paired(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace utilimax
