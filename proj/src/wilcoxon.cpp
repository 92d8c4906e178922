#include "utilimax/wilcoxon.hpp"

#include "utilimax/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace utilimax {

namespace {

/// Midranks of |d| doubled, so ties stay integral (ranks k and k + 1 tied
/// -> 2k + 1 each).
std::vector<long> doubled_midranks(const std::vector<double>& abs_diffs, double& tie_term) {
    const std::size_t n = abs_diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return abs_diffs[a] < abs_diffs[b]; });
    std::vector<long> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && abs_diffs[order[j]] == abs_diffs[order[i]]) ++j;
        // positions i+1 .. j share rank (i+1+j)/2
        const long doubled = static_cast<long>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = doubled;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    return ranks;
}

}  // namespace

WilcoxonResult wilcoxon_one_sided_paired(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "wilcoxon: samples differ in length");
    if (x.size() < 5) throw Error(ErrorCode::InvalidArgument, "wilcoxon: need at least 5 pairs");

    std::vector<double> abs_diffs;
    std::vector<bool> positive;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (std::isnan(d)) throw Error(ErrorCode::InvalidArgument, "wilcoxon: NaN difference");
        if (d == 0.0) continue;
        abs_diffs.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }

    WilcoxonResult r;
    r.n_used = abs_diffs.size();
    if (r.n_used == 0) {
        r.note = "all differences are zero; p-value undefined";
        return r;
    }

    double tie_term = 0.0;
    const auto ranks = doubled_midranks(abs_diffs, tie_term);
    long w2 = 0;  // 2 * W+
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (positive[i]) w2 += ranks[i];
    }
    r.w_plus = static_cast<double>(w2) / 2.0;
    const double n = static_cast<double>(r.n_used);

    if (r.n_used <= kWilcoxonExactMaxN) {
        // counts[s] = number of sign assignments with 2 * W+ == s.
        const long total = std::accumulate(ranks.begin(), ranks.end(), 0L);
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        long reach = 0;
        for (long rk : ranks) {
            for (long s = reach; s >= 0; --s) {
                if (counts[static_cast<std::size_t>(s)] != 0.0) {
                    counts[static_cast<std::size_t>(s + rk)] += counts[static_cast<std::size_t>(s)];
                }
            }
            reach += rk;
        }
        double tail = 0.0;
        for (long s = w2; s <= total; ++s) tail += counts[static_cast<std::size_t>(s)];
        r.p_value = std::ldexp(tail, -static_cast<int>(r.n_used));
        r.exact = true;
        return r;
    }

    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) {
        r.note = "degenerate variance";
        return r;
    }
    const double z = (r.w_plus - mean - 0.5) / std::sqrt(var);
    r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    r.note = "normal approximation with tie and continuity correction";
    return r;
}

}  // namespace utilimax
