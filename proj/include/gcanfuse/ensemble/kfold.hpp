#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "../errors.hpp"

namespace gcanfuse {

/// Seeded shuffle of 0..n-1 cut into k contiguous folds; the first n % k
/// folds hold one extra item.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                         std::uint64_t seed) {
  if (k == 0 || k > n) throw UsageError("kfold_split: need 1 <= k <= number of samples");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(at),
                    idx.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  return folds;
}

/// Everything outside fold `held_out`, in fold order.
inline std::vector<std::size_t> complement(const std::vector<std::vector<std::size_t>>& folds,
                                           std::size_t held_out) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  return out;
}

}  // namespace gcanfuse
