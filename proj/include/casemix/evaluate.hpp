#pragma once
// Grouping quality: intra-group variance on the log1p scale, ordinal
// confusion summaries, boxplot statistics and the learned-vs-rule grouping
// comparison.

#include "casemix/core.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace casemix::evaluate {

struct GroupVariance {
  int group = 0;
  std::size_t n = 0;
  double variance = 0.0;  // sample variance of log1p(values); 0 when n <= 1
  bool too_small = false;
};

struct VarianceReport {
  std::vector<GroupVariance> groups;  // ascending group label
  double mean = 0.0;                  // unweighted over groups with n >= 2
  double weighted_mean = 0.0;         // weighted by n - 1 over the same groups
};

VarianceReport intra_group_variance(std::span<const double> values, std::span<const int> groups);

struct ConfusionSummary {
  Eigen::MatrixXi matrix;  // rows = truth, cols = prediction, index = rank - 1
  std::size_t total = 0;
  double accuracy = 0.0;
  double total_loss = 0.0;
  double mean_abs_distance = 0.0;
  int max_distance = 0;                          // over errors; 0 when none
  std::vector<std::size_t> distance_histogram;  // index = |truth - prediction|

  /// Fraction of errors within `d` classes of the truth (1 when no errors).
  double errors_within(int d) const;
};

ConfusionSummary confusion(std::span<const int> truth, std::span<const int> predicted, const CostMatrix& loss);

struct BoxStats {
  int group = 0;
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct BoxplotReport {
  std::vector<BoxStats> groups;
  std::vector<int> empty_groups;  // labels in [1, k] with no members
};

/// Quartiles interpolate linearly between order statistics at position
/// (n - 1) p. With k > 0, labels 1..k that never occur are flagged.
BoxplotReport boxplot_stats(std::span<const double> values, std::span<const int> groups, int k = 0);

struct MergeCandidate {
  int lower = 0;  // ranks lower and lower + 1
  double confusion_rate = 0.0;
};

/// Adjacent rank pairs whose mutual confusion, relative to both classes'
/// true counts, reaches `threshold`.
std::vector<MergeCandidate> merge_candidates(const ConfusionSummary& c, double threshold = 0.2);

struct FactorComparison {
  std::string factor;
  VarianceReport learned;
  VarianceReport rules;
  double ratio = 1.0;  // rules.mean / learned.mean
  bool ratio_infinite = false;
  std::vector<std::pair<int, double>> learned_group_means;  // raw scale, rank order
  std::vector<std::pair<int, double>> rules_group_means;
  bool learned_monotone = true;
  bool rules_monotone = true;
};

struct GroupingComparison {
  std::vector<FactorComparison> factors;  // los_days, total_cost, tbsa_pct
  std::vector<MergeCandidate> merge_candidates;
  bool learned_lower_everywhere() const;
};

/// Compares two labelings of the same records over LOS, cost and TBSA.
GroupingComparison compare_groupings(const Dataset& ds, std::span<const int> learned_labels,
                                     std::span<const int> rule_labels,
                                     const std::optional<ConfusionSummary>& confusion = std::nullopt,
                                     double merge_threshold = 0.2);

/// Mean of `values` per group label, ascending label.
std::vector<std::pair<int, double>> group_means(std::span<const double> values, std::span<const int> groups);

void to_json(nlohmann::json& j, const VarianceReport& r);
void to_json(nlohmann::json& j, const ConfusionSummary& c);
void to_json(nlohmann::json& j, const BoxplotReport& b);
void to_json(nlohmann::json& j, const GroupingComparison& g);

}  // namespace casemix::evaluate
