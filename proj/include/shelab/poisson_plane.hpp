#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shelab/random.hpp"

namespace shelab {

// Realised planar Poisson points on [0, U] x [0, V], sorted by first
// coordinate (ties by second).  Immutable after construction; concurrent
// queries are safe.
struct PoissonPointSet {
  double box_u = 0.0;
  double box_v = 0.0;
  std::vector<std::pair<double, double>> points;

  std::size_t count() const { return points.size(); }
};

inline PoissonPointSet sample_poisson_plane(RandomStream& rng, double U, double V) {
  if (!(U > 0.0) || !(V > 0.0))
    throw std::invalid_argument("sample_poisson_plane: extents must be positive");
  PoissonPointSet pps;
  pps.box_u = U;
  pps.box_v = V;
  const long long n = rng.poisson(U * V);
  pps.points.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const double u = rng.uniform(0.0, U);
    const double v = rng.uniform(0.0, V);
    pps.points.emplace_back(u, v);
  }
  std::sort(pps.points.begin(), pps.points.end());
  return pps;
}

namespace detail {

class FenwickCounter {
 public:
  explicit FenwickCounter(std::size_t n) : tree_(n + 1, 0) {}

  void add(std::size_t i) {  // 0-based position
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  long long prefix(std::size_t i) const {  // count of positions <= i (0-based)
    long long s = 0;
    for (++i; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<long long> tree_;
};

}  // namespace detail

// Parity of the dominated point count (u <= t, v <= x) for each query.
// Offline sweep over u with a binary indexed tree over compressed v ranks:
// O((P+Q) log(P+Q)) total instead of O(P*Q).
inline std::vector<int> parity_count(const PoissonPointSet& pps,
                                     const std::vector<std::pair<double, double>>& queries) {
  for (const auto& [t, x] : queries) {
    if (t < 0.0 || t > pps.box_u || x < 0.0 || x > pps.box_v)
      throw std::invalid_argument("parity_count: query outside the box");
  }
  std::vector<int> parity(queries.size(), 0);
  if (pps.points.empty() || queries.empty()) return parity;

  std::vector<double> vs(pps.points.size());
  for (std::size_t i = 0; i < pps.points.size(); ++i) vs[i] = pps.points[i].second;
  std::sort(vs.begin(), vs.end());

  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return queries[a].first < queries[b].first; });

  detail::FenwickCounter bit(vs.size());
  std::size_t next_point = 0;
  for (std::size_t qi : order) {
    const auto& [t, x] = queries[qi];
    while (next_point < pps.points.size() && pps.points[next_point].first <= t) {
      const std::size_t rank = static_cast<std::size_t>(
          std::lower_bound(vs.begin(), vs.end(), pps.points[next_point].second) - vs.begin());
      bit.add(rank);
      ++next_point;
    }
    const std::size_t below =
        static_cast<std::size_t>(std::upper_bound(vs.begin(), vs.end(), x) - vs.begin());
    const long long c = below == 0 ? 0 : bit.prefix(below - 1);
    parity[qi] = static_cast<int>(c & 1);
  }
  return parity;
}

}  // namespace shelab
