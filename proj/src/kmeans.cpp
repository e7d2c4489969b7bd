#include "casemix/kmeans.hpp"

#include "casemix/preprocess.hpp"

#include <set>

namespace casemix {

std::vector<int> rank_clusters(std::span<const int> assignments, int k, std::span<const double> severity) {
  if (assignments.size() != severity.size()) {
    throw std::invalid_argument("rank_clusters: severity values not aligned with assignments");
  }
  if (k < 1) throw std::invalid_argument("rank_clusters: k must be >= 1");
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int c = assignments[i];
    if (c < 0 || c >= k) throw std::invalid_argument("rank_clusters: cluster id out of range");
    sum[c] += severity[i];
    ++count[c];
  }
  std::vector<double> mean(k);
  for (int c = 0; c < k; ++c) {
    mean[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : std::numeric_limits<double>::infinity();
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean[a] < mean[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) rank[order[r]] = r + 1;
  return rank;
}

std::vector<int> cluster_ranked_1d(std::span<const double> values, int k, const KMeansOptions& options) {
  Eigen::Map<const Eigen::VectorXd> pts(values.data(), static_cast<Eigen::Index>(values.size()));
  const auto result = kmeans(pts, k, options);
  const auto rank = rank_clusters(result, values);
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = rank[result.assignments[i]];
  return out;
}

std::vector<int> cluster_factor(std::span<const double> values, int k, const KMeansOptions& options) {
  const auto logged = preprocess::log1p_factor(values);
  return cluster_ranked_1d(logged, k, options);
}

bool forms_intervals(std::span<const double> values, std::span<const int> assignments) {
  if (values.size() != assignments.size()) return false;
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::set<int> closed;
  int current = -1;
  double last_value = 0.0;
  for (std::size_t p = 0; p < idx.size(); ++p) {
    const int c = assignments[idx[p]];
    const double v = values[idx[p]];
    if (c != current) {
      // Equal values split across clusters break the interval structure.
      if (p > 0 && v == last_value) return false;
      if (closed.contains(c)) return false;
      if (current >= 0) closed.insert(current);
      current = c;
    }
    last_value = v;
  }
  return true;
}

}  // namespace casemix
