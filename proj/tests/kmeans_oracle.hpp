#pragma once
// Exhaustive optimum of 1-D k-means over all partitions into exactly k
// non-empty groups (k^n labelings; fine for n <= 8, k <= 3).

#include <algorithm>
#include <limits>
#include <vector>

namespace casemix::testing {

inline double partition_inertia(const std::vector<double>& x, const std::vector<int>& label, int k) {
  std::vector<double> sum(k, 0.0);
  std::vector<int> cnt(k, 0);
  for (std::size_t i = 0; i < x.size(); ++i) sum[label[i]] += x[i], ++cnt[label[i]];
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = sum[label[i]] / cnt[label[i]];
    total += (x[i] - m) * (x[i] - m);
  }
  return total;
}

inline double brute_force_kmeans(const std::vector<double>& x, int k) {
  const std::size_t n = x.size();
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> cnt(k, 0);
    for (int l : label) ++cnt[l];
    if (std::all_of(cnt.begin(), cnt.end(), [](int c) { return c > 0; })) {
      best = std::min(best, partition_inertia(x, label, k));
    }
    std::size_t i = 0;
    while (i < n && ++label[i] == k) label[i++] = 0;
    if (i == n) break;
  }
  return best;
}

}  // namespace casemix::testing
