#include "casemix/evaluate.hpp"

#include "casemix/preprocess.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace casemix::evaluate {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": inputs are not aligned");
}

std::map<int, std::vector<double>> by_group(std::span<const double> values, std::span<const int> groups) {
  std::map<int, std::vector<double>> out;
  for (std::size_t i = 0; i < values.size(); ++i) out[groups[i]].push_back(values[i]);
  return out;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

bool non_decreasing(const std::vector<std::pair<int, double>>& means) {
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i].second < means[i - 1].second) return false;
  }
  return true;
}

}  // namespace

VarianceReport intra_group_variance(std::span<const double> values, std::span<const int> groups) {
  require_aligned(values.size(), groups.size(), "intra_group_variance");
  const auto logged = preprocess::log1p_factor(values);
  VarianceReport r;
  double sum = 0.0, wsum = 0.0, wtotal = 0.0;
  std::size_t counted = 0;
  for (auto& [g, xs] : by_group(logged, groups)) {
    GroupVariance gv{g, xs.size(), 0.0, xs.size() <= 1};
    if (xs.size() >= 2) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      gv.variance = ss / static_cast<double>(xs.size() - 1);
      sum += gv.variance;
      wsum += ss;
      wtotal += static_cast<double>(xs.size() - 1);
      ++counted;
    }
    r.groups.push_back(gv);
  }
  r.mean = counted ? sum / static_cast<double>(counted) : 0.0;
  r.weighted_mean = wtotal > 0 ? wsum / wtotal : 0.0;
  return r;
}

double ConfusionSummary::errors_within(int d) const {
  std::size_t errors = 0, near = 0;
  for (std::size_t dist = 1; dist < distance_histogram.size(); ++dist) {
    errors += distance_histogram[dist];
    if (static_cast<int>(dist) <= d) near += distance_histogram[dist];
  }
  return errors ? static_cast<double>(near) / static_cast<double>(errors) : 1.0;
}

ConfusionSummary confusion(std::span<const int> truth, std::span<const int> predicted, const CostMatrix& loss) {
  require_aligned(truth.size(), predicted.size(), "confusion");
  const int k = loss.k();
  ConfusionSummary c;
  c.matrix = Eigen::MatrixXi::Zero(k, k);
  c.distance_histogram.assign(static_cast<std::size_t>(k), 0);
  double abs_dist = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 1 || t > k || p < 1 || p > k) throw std::invalid_argument("confusion: label outside [1, K]");
    ++c.matrix(t - 1, p - 1);
    c.total_loss += loss(t - 1, p - 1);
    const int d = std::abs(t - p);
    ++c.distance_histogram[d];
    abs_dist += d;
    c.max_distance = std::max(c.max_distance, d);
  }
  c.total = truth.size();
  c.accuracy = c.total ? static_cast<double>(c.matrix.trace()) / static_cast<double>(c.total) : 0.0;
  c.mean_abs_distance = c.total ? abs_dist / static_cast<double>(c.total) : 0.0;
  return c;
}

BoxplotReport boxplot_stats(std::span<const double> values, std::span<const int> groups, int k) {
  require_aligned(values.size(), groups.size(), "boxplot_stats");
  BoxplotReport r;
  auto grouped = by_group(values, groups);
  for (auto& [g, xs] : grouped) {
    std::sort(xs.begin(), xs.end());
    r.groups.push_back({g, xs.size(), xs.front(), quantile_sorted(xs, 0.25), quantile_sorted(xs, 0.5),
                        quantile_sorted(xs, 0.75), xs.back()});
  }
  for (int g = 1; g <= k; ++g) {
    if (!grouped.contains(g)) r.empty_groups.push_back(g);
  }
  return r;
}

std::vector<MergeCandidate> merge_candidates(const ConfusionSummary& c, double threshold) {
  std::vector<MergeCandidate> out;
  for (Eigen::Index i = 0; i + 1 < c.matrix.rows(); ++i) {
    const double mutual = c.matrix(i, i + 1) + c.matrix(i + 1, i);
    const double base = c.matrix.row(i).sum() + c.matrix.row(i + 1).sum();
    if (base <= 0) continue;
    const double rate = mutual / base;
    if (rate >= threshold) out.push_back({static_cast<int>(i) + 1, rate});
  }
  return out;
}

std::vector<std::pair<int, double>> group_means(std::span<const double> values, std::span<const int> groups) {
  require_aligned(values.size(), groups.size(), "group_means");
  std::vector<std::pair<int, double>> out;
  for (auto& [g, xs] : by_group(values, groups)) {
    double s = 0.0;
    for (double x : xs) s += x;
    out.emplace_back(g, s / static_cast<double>(xs.size()));
  }
  return out;
}

bool GroupingComparison::learned_lower_everywhere() const {
  return std::all_of(factors.begin(), factors.end(),
                     [](const FactorComparison& f) { return f.learned.mean < f.rules.mean; });
}

GroupingComparison compare_groupings(const Dataset& ds, std::span<const int> learned_labels,
                                     std::span<const int> rule_labels,
                                     const std::optional<ConfusionSummary>& confusion, double merge_threshold) {
  require_aligned(ds.size(), learned_labels.size(), "compare_groupings");
  require_aligned(ds.size(), rule_labels.size(), "compare_groupings");
  GroupingComparison out;
  const std::pair<const char*, double (PatientRecord::*)() const> factors[] = {
      {"los_days", &PatientRecord::los},
      {"total_cost", &PatientRecord::cost},
      {"tbsa_pct", &PatientRecord::tbsa},
  };
  for (const auto& [name, getter] : factors) {
    std::vector<double> values;
    values.reserve(ds.size());
    for (const auto& r : ds.records) values.push_back((r.*getter)());
    FactorComparison f;
    f.factor = name;
    f.learned = intra_group_variance(values, learned_labels);
    f.rules = intra_group_variance(values, rule_labels);
    if (f.learned.mean > 0) {
      f.ratio = f.rules.mean / f.learned.mean;
    } else if (f.rules.mean > 0) {
      f.ratio = std::numeric_limits<double>::infinity();
      f.ratio_infinite = true;
    }
    f.learned_group_means = group_means(values, learned_labels);
    f.rules_group_means = group_means(values, rule_labels);
    f.learned_monotone = non_decreasing(f.learned_group_means);
    f.rules_monotone = non_decreasing(f.rules_group_means);
    out.factors.push_back(std::move(f));
  }
  if (confusion) out.merge_candidates = merge_candidates(*confusion, merge_threshold);
  return out;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const VarianceReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"group", g.group}, {"n", g.n}, {"variance", g.variance}, {"too_small", g.too_small}});
  }
  j = {{"mean", r.mean}, {"weighted_mean", r.weighted_mean}, {"groups", groups}};
}

void to_json(nlohmann::json& j, const ConfusionSummary& c) {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.matrix.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < c.matrix.cols(); ++k) row.push_back(c.matrix(i, k));
    m.push_back(std::move(row));
  }
  j = {{"matrix", m},
       {"total", c.total},
       {"accuracy", c.accuracy},
       {"total_loss", c.total_loss},
       {"mean_abs_distance", c.mean_abs_distance},
       {"max_distance", c.max_distance},
       {"distance_histogram", c.distance_histogram},
       {"errors_within_3", c.errors_within(3)}};
}

void to_json(nlohmann::json& j, const BoxplotReport& b) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : b.groups) {
    groups.push_back({{"group", g.group},
                      {"n", g.n},
                      {"min", g.min},
                      {"q1", g.q1},
                      {"median", g.median},
                      {"q3", g.q3},
                      {"max", g.max}});
  }
  j = {{"groups", groups}, {"empty_groups", b.empty_groups}};
}

void to_json(nlohmann::json& j, const GroupingComparison& g) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : g.factors) {
    nlohmann::json jf = {{"factor", f.factor},
                         {"learned", f.learned},
                         {"rules", f.rules},
                         {"learned_monotone", f.learned_monotone},
                         {"rules_monotone", f.rules_monotone},
                         {"ratio_infinite", f.ratio_infinite},
                         {"learned_group_means", f.learned_group_means},
                         {"rules_group_means", f.rules_group_means}};
    jf["ratio_rules_over_learned"] = f.ratio_infinite ? nlohmann::json("inf") : nlohmann::json(f.ratio);
    factors.push_back(std::move(jf));
  }
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : g.merge_candidates) {
    merges.push_back({{"classes", {m.lower, m.lower + 1}}, {"confusion_rate", m.confusion_rate}});
  }
  j = {{"factors", factors}, {"merge_candidates", merges},
       {"learned_lower_everywhere", g.learned_lower_everywhere()}};
}

}  // namespace casemix::evaluate
