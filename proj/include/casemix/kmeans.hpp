#pragma once
// Lloyd's k-means with k-means++ seeding and Hartigan single-point
// refinement, best of several restarts.
// Points are the rows of a dense matrix. All randomness comes from the
// counter-based stream keyed by (seed, restart), so results depend only on
// the inputs and the seed.

#include "casemix/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace casemix {

struct KMeansOptions {
  int restarts = 10;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct KMeansResult {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::vector<int> assignments;
  Matrix centers;  // k x d
  Scalar inertia = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  // Inertia after every assignment step of the winning restart.
  std::vector<Scalar> inertia_trace;

  int k() const { return static_cast<int>(centers.rows()); }
};

namespace detail {

template <typename Derived>
std::size_t count_distinct_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  std::vector<std::vector<Scalar>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    rows[i].resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) rows[i][j] = x(i, j);
  }
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

template <typename Derived, typename Centers>
typename Derived::Scalar sq_dist(const Eigen::MatrixBase<Derived>& x, Eigen::Index i,
                                 const Centers& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

}  // namespace detail

template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& points, int k,
                                              const KMeansOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  using Result = KMeansResult<Scalar>;
  using Matrix = typename Result::Matrix;

  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (n == 0 || d == 0) throw std::invalid_argument("kmeans: empty input");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (options.restarts < 1 || options.max_iter < 1) {
    throw std::invalid_argument("kmeans: restarts and max_iter must be >= 1");
  }
  if (!points.allFinite()) throw std::invalid_argument("kmeans: non-finite coordinates");
  if (static_cast<std::size_t>(k) > detail::count_distinct_rows(points)) {
    throw std::invalid_argument("kmeans: k exceeds the number of distinct points");
  }

  Result best;
  bool have_best = false;
  std::vector<int> assign(static_cast<std::size_t>(n));
  std::vector<Scalar> dist(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));

  for (int restart = 0; restart < options.restarts; ++restart) {
    rng::Stream stream(options.seed, {static_cast<std::uint64_t>(restart)});
    Matrix centers(k, d);

    // k-means++ seeding.
    centers.row(0) = points.row(static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n))));
    for (Eigen::Index i = 0; i < n; ++i) dist[i] = detail::sq_dist(points, i, centers, 0);
    for (int c = 1; c < k; ++c) {
      Scalar total = 0;
      for (Eigen::Index i = 0; i < n; ++i) total += dist[i];
      const Scalar target = static_cast<Scalar>(stream.uniform()) * total;
      Eigen::Index chosen = -1;
      Scalar acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (dist[i] <= 0) continue;
        acc += dist[i];
        chosen = i;
        if (acc > target) break;
      }
      centers.row(c) = points.row(chosen);
      for (Eigen::Index i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], detail::sq_dist(points, i, centers, c));
      }
    }

    auto assign_all = [&] {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        Scalar bestd = detail::sq_dist(points, i, centers, 0);
        for (int c = 1; c < k; ++c) {
          const Scalar dd = detail::sq_dist(points, i, centers, c);
          if (dd < bestd) {
            bestd = dd;
            arg = c;
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
        dist[i] = bestd;
      }
      // Empty clusters take the point farthest from its own center.
      std::fill(counts.begin(), counts.end(), 0);
      for (Eigen::Index i = 0; i < n; ++i) ++counts[assign[i]];
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        Eigen::Index far = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (counts[assign[i]] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
        }
        --counts[assign[far]];
        assign[far] = c;
        ++counts[c];
        dist[far] = 0;
        centers.row(c) = points.row(far);
        changed = true;
      }
      return changed;
    };

    auto inertia_now = [&] {
      Scalar s = 0;
      for (Eigen::Index i = 0; i < n; ++i) s += detail::sq_dist(points, i, centers, assign[i]);
      return s;
    };

    auto recenter = [&] {
      centers.setZero();
      for (Eigen::Index i = 0; i < n; ++i) centers.row(assign[i]) += points.row(i);
      for (int c = 0; c < k; ++c) centers.row(c) /= static_cast<Scalar>(counts[c]);
    };

    // Hartigan refinement: move single points whenever that lowers the
    // inertia once both affected centers are updated. Lloyd-stable
    // partitions can still admit such moves.
    auto hartigan_pass = [&] {
      bool moved = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = assign[i];
        if (counts[a] <= 1) continue;
        const Scalar na = static_cast<Scalar>(counts[a]);
        const Scalar remove_gain = detail::sq_dist(points, i, centers, a) * na / (na - 1);
        int target = -1;
        Scalar best_cost = remove_gain;
        for (int c = 0; c < k; ++c) {
          if (c == a) continue;
          const Scalar nc = static_cast<Scalar>(counts[c]);
          const Scalar add_cost = detail::sq_dist(points, i, centers, c) * nc / (nc + 1);
          if (add_cost < best_cost) {
            best_cost = add_cost;
            target = c;
          }
        }
        if (target < 0 || !(remove_gain - best_cost > remove_gain * Scalar(1e-12))) continue;
        const Scalar nt = static_cast<Scalar>(counts[target]);
        centers.row(a) = (centers.row(a) * na - points.row(i)) / (na - 1);
        centers.row(target) = (centers.row(target) * nt + points.row(i)) / (nt + 1);
        --counts[a];
        ++counts[target];
        assign[i] = target;
        moved = true;
      }
      return moved;
    };

    std::fill(assign.begin(), assign.end(), -1);
    assign_all();
    std::vector<Scalar> trace{inertia_now()};
    int iter = 0;
    auto lloyd = [&] {
      while (iter < options.max_iter) {
        ++iter;
        recenter();
        const bool changed = assign_all();
        trace.push_back(inertia_now());
        if (!changed) break;
      }
    };
    lloyd();
    while (iter < options.max_iter) {
      recenter();
      if (!hartigan_pass()) break;
      ++iter;
      trace.push_back(inertia_now());
      lloyd();
    }

    const Scalar inertia = inertia_now();
    if (!have_best || inertia < best.inertia) {
      best.assignments = assign;
      best.centers = centers;
      best.inertia = inertia;
      best.iterations = iter;
      best.inertia_trace = std::move(trace);
      have_best = true;
    }
  }
  best.seed = options.seed;
  return best;
}

/// Maps cluster id -> rank in [1, k] by ascending mean severity; ties go
/// to the lower cluster id. Empty clusters rank last.
std::vector<int> rank_clusters(std::span<const int> assignments, int k, std::span<const double> severity);

template <typename Scalar>
std::vector<int> rank_clusters(const KMeansResult<Scalar>& result, std::span<const double> severity) {
  return rank_clusters(result.assignments, result.k(), severity);
}

/// log1p -> 1-D k-means -> rank by mean log value. Returns one rank per input.
std::vector<int> cluster_factor(std::span<const double> values, int k, const KMeansOptions& options = {});

/// 1-D k-means on raw values, ranked by mean value.
std::vector<int> cluster_ranked_1d(std::span<const double> values, int k, const KMeansOptions& options = {});

/// True if every cluster occupies a contiguous run of the sorted values.
bool forms_intervals(std::span<const double> values, std::span<const int> assignments);

}  // namespace casemix
