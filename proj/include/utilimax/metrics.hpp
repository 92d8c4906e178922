#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace utilimax {

/// |top-k ∩ relevant| / k. Throws Error(InvalidArgument) when fewer than k
/// recommendations are given or an id repeats.
double precision_at_k(const std::vector<std::string>& recommended, const std::set<std::string>& relevant,
                      std::size_t k);

/// Binary-gain NDCG@k: DCG = sum gain_i / log2(i + 1) over the top k,
/// normalised by the DCG of min(|relevant|, k) hits at the top. 0 when
/// nothing is relevant.
double ndcg_at_k(const std::vector<std::string>& recommended, const std::set<std::string>& relevant,
                 std::size_t k);

/// Graded variant: gain is looked up per id (missing ids gain 0); the ideal
/// list sorts all gains descending.
double ndcg_at_k_graded(const std::vector<std::string>& recommended, const std::map<std::string, double>& gains,
                        std::size_t k);

}  // namespace utilimax
