#include "utilimax/metrics.hpp"

#include "utilimax/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace utilimax {

namespace {

void check_ranking(const std::vector<std::string>& recommended, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    if (recommended.size() < k) {
        throw Error(ErrorCode::InvalidArgument, "fewer than k recommendations: " +
                                                    std::to_string(recommended.size()) + " < " +
                                                    std::to_string(k));
    }
    std::set<std::string> seen;
    for (const auto& id : recommended) {
        if (!seen.insert(id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate recommendation: " + id);
        }
    }
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double precision_at_k(const std::vector<std::string>& recommended, const std::set<std::string>& relevant,
                      std::size_t k) {
    check_ranking(recommended, k);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += relevant.count(recommended[i]);
    return static_cast<double>(hits) / static_cast<double>(k);
}

double ndcg_at_k(const std::vector<std::string>& recommended, const std::set<std::string>& relevant,
                 std::size_t k) {
    check_ranking(recommended, k);
    if (relevant.empty()) return 0.0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (relevant.count(recommended[i])) dcg += discount(i + 1);
    }
    double idcg = 0.0;
    const std::size_t ideal_hits = std::min(relevant.size(), k);
    for (std::size_t i = 0; i < ideal_hits; ++i) idcg += discount(i + 1);
    return dcg / idcg;
}

double ndcg_at_k_graded(const std::vector<std::string>& recommended, const std::map<std::string, double>& gains,
                        std::size_t k) {
    check_ranking(recommended, k);
    std::vector<double> ideal;
    for (const auto& [id, g] : gains) {
        if (g < 0.0) throw Error(ErrorCode::InvalidArgument, "negative gain for " + id);
        if (g > 0.0) ideal.push_back(g);
    }
    if (ideal.empty()) return 0.0;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double dcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        auto it = gains.find(recommended[i]);
        if (it != gains.end()) dcg += it->second * discount(i + 1);
    }
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(ideal.size(), k); ++i) idcg += ideal[i] * discount(i + 1);
    return dcg / idcg;
}

}  // namespace utilimax
