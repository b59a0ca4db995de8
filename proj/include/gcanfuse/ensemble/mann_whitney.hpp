#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "../errors.hpp"

namespace gcanfuse {

struct MannWhitneyResult {
  double u = 0;             // U statistic of the first sample
  double p_two_sided = 1;
  bool exact = false;
};

/// U_x = #{x_i > y_j} + 0.5 #{x_i == y_j}
inline double mann_whitney_u_statistic(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  double u = 0;
  for (double a : x)
    for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return u;
}

inline bool has_ties(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> all(x);
  all.insert(all.end(), y.begin(), y.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

/// Exact two-sided p for tie-free samples: enumerates every assignment of the
/// pooled ranks to the first sample and counts those at least as far from
/// n*m/2 as the observed U.
inline MannWhitneyResult mann_whitney_exact(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw UsageError("mann_whitney_u: empty sample");
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(y.size());
  const int total = n + m;
  if (total > 30) throw UsageError("mann_whitney_exact: sample too large to enumerate");

  MannWhitneyResult r;
  r.exact = true;
  r.u = mann_whitney_u_statistic(x, y);
  const double centre = 0.5 * n * m;
  const double observed = std::abs(r.u - centre);

  // Rank r (0-based) of a pooled element beats every y element ranked below
  // it; for a bitmask of x-ranks, U = sum over x-ranks of (#y ranks below).
  long long hits = 0, count = 0;
  for (unsigned long mask = 0; mask < (1UL << total); ++mask) {
    if (__builtin_popcountl(mask) != n) continue;
    ++count;
    double u = 0;
    int y_below = 0;
    for (int k = 0; k < total; ++k) {
      if (mask & (1UL << k))
        u += y_below;
      else
        ++y_below;
    }
    // Integer-valued statistics: compare with a half-unit guard.
    if (std::abs(u - centre) >= observed - 1e-9) ++hits;
  }
  r.p_two_sided = static_cast<double>(hits) / static_cast<double>(count);
  return r;
}

/// Normal approximation with tie-corrected variance and continuity
/// correction 0.5; two-sided.
inline MannWhitneyResult mann_whitney_normal(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw UsageError("mann_whitney_u: empty sample");
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  const double total = n + m;
  MannWhitneyResult r;
  r.u = mann_whitney_u_statistic(x, y);

  std::map<double, double> groups;
  for (double v : x) groups[v] += 1;
  for (double v : y) groups[v] += 1;
  double tie_term = 0;
  for (const auto& [v, t] : groups) tie_term += t * t * t - t;

  const double mu = 0.5 * n * m;
  double var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (!(var > 0)) {
    r.p_two_sided = 1.0;
    return r;
  }
  double z = std::max(0.0, std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

inline constexpr std::size_t kExactLimit = 16;

/// Exact enumeration when n + m <= 16 and there are no ties, normal
/// approximation otherwise.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw UsageError("mann_whitney_u: empty sample");
  if (x.size() + y.size() <= kExactLimit && !has_ties(x, y)) return mann_whitney_exact(x, y);
  return mann_whitney_normal(x, y);
}

/// Significance buckets: **** p <= 1e-4, *** <= 1e-3, ** <= 1e-2, * <= 5e-2,
/// ns otherwise.
inline std::string significance_stars(double p) {
  if (p <= 1e-4) return "****";
  if (p <= 1e-3) return "***";
  if (p <= 1e-2) return "**";
  if (p <= 5e-2) return "*";
  return "ns";
}

}  // namespace gcanfuse
