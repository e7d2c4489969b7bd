#pragma once
// Cost-sensitive CART.
//
// Splits maximise the decrease of the loss-weighted Gini impurity
//   I(p) = sum_{i != j} L(i, j) p_i p_j
// and every node is labelled with the class of least expected
// misclassification cost under the same loss matrix L. The grown tree is
// pruned by weakest-link cost-complexity pruning, where the risk of a node
// is its total expected cost and `cp` is relative to the root's risk.
//
// Determinism: features are scanned in schema order, thresholds in
// ascending order, and a candidate replaces the incumbent only when its
// decrease is strictly larger, so ties resolve to the first feature and
// the lowest threshold.

#include "casemix/core.hpp"
#include "casemix/features.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace casemix::tree {

inline constexpr const char* kFormatVersion = "casemix-tree/1";

struct TreeParams {
  int min_split = 20;
  int min_leaf = 7;
  int max_depth = 30;
  double cp = 0.01;
  CostMatrix loss = linear_cost_matrix(kDefaultClassCount);

  void validate() const;
};

struct Node {
  int feature = -1;              // -1 for leaves
  double threshold = 0.0;        // numeric: left when x < threshold
  std::vector<int> left_levels;  // categorical: left when code is listed
  int left = -1;
  int right = -1;
  int n = 0;
  std::vector<int> counts;  // per class, index = rank - 1
  double impurity = 0.0;
  double decrease = 0.0;       // internal nodes: n I - nL IL - nR IR
  int label = 1;               // least-expected-cost rank
  double expected_cost = 0.0;  // per row, at `label`

  bool is_leaf() const { return feature < 0; }
  bool operator==(const Node&) const = default;
};

struct DecisionTree {
  std::vector<Node> nodes;  // preorder, nodes[0] is the root
  TreeParams params;
  FeatureSchema schema;

  int depth() const;
  int leaf_count() const;
  int k() const { return params.loss.k(); }
};

/// Loss-weighted Gini of a class-count vector. Throws on an all-zero vector.
template <typename Derived>
double gini_loss_impurity(const Eigen::MatrixBase<Derived>& counts, const CostMatrix& loss) {
  if (counts.size() != loss.k()) throw std::invalid_argument("gini_loss_impurity: counts length != k");
  const Eigen::VectorXd c = counts.template cast<double>();
  if ((c.array() < 0).any()) throw std::invalid_argument("gini_loss_impurity: negative count");
  const double n = c.sum();
  if (n <= 0) throw std::invalid_argument("gini_loss_impurity: all-zero counts");
  const Eigen::VectorXd p = c / n;
  double acc = 0.0;
  for (int i = 0; i < loss.k(); ++i) {
    for (int j = 0; j < loss.k(); ++j) {
      if (i != j) acc += loss(i, j) * p(i) * p(j);
    }
  }
  return acc;
}

struct LeafDecision {
  int label = 1;  // 1-based rank
  double expected_cost = 0.0;
};

/// argmin_k sum_i L(i, k) count_i, lowest rank on ties; expected_cost is
/// that minimum divided by the row count.
template <typename Derived>
LeafDecision leaf_label(const Eigen::MatrixBase<Derived>& counts, const CostMatrix& loss) {
  if (counts.size() != loss.k()) throw std::invalid_argument("leaf_label: counts length != k");
  const Eigen::VectorXd c = counts.template cast<double>();
  const double n = c.sum();
  if (n <= 0) throw std::invalid_argument("leaf_label: all-zero counts");
  const Eigen::RowVectorXd cost = c.transpose() * loss.entries();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < cost.size(); ++k) {
    if (cost(k) < cost(best)) best = k;
  }
  return {static_cast<int>(best) + 1, cost(best) / n};
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::vector<int> left_levels;
  double decrease = 0.0;
  int n_left = 0;
  int n_right = 0;
};

/// Best split of the given rows, or nullopt when no split with positive
/// decrease respects min_leaf. Labels are 1-based ranks, one per table row.
std::optional<Split> best_split(const FeatureTable& data, std::span<const int> labels,
                                std::span<const int> rows, const TreeParams& params);

/// Grows the tree then applies cost-complexity pruning with params.cp.
DecisionTree build_tree(const FeatureTable& data, std::span<const int> labels, const TreeParams& params);

/// Weakest-link pruning of an existing tree at complexity `cp`.
DecisionTree prune(const DecisionTree& tree, double cp);

/// Row encoded against tree.schema. Missing (NaN) values follow the child
/// with more training rows (left on ties).
int predict(const DecisionTree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Looks features up by name; throws std::invalid_argument when a value has
/// the wrong type or the record is malformed.
int predict(const DecisionTree& tree, const PatientRecord& record);

/// Predicts every row of a table whose columns include the tree's features.
std::vector<int> predict(const DecisionTree& tree, const FeatureTable& table);

/// Sum of split decreases per feature, descending; unused features omitted.
std::vector<std::pair<std::string, double>> variable_importance(const DecisionTree& tree);

struct RuleCondition {
  int feature = -1;
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::optional<double> lower;  // x >= lower
  std::optional<double> upper;  // x < upper
  std::vector<int> levels;      // categorical: allowed codes

  bool operator==(const RuleCondition&) const = default;
};

struct TreeRule {
  std::vector<RuleCondition> conditions;  // at most one per feature
  int label = 1;
  int support = 0;
  double expected_cost = 0.0;
};

/// One rule per leaf, left to right. Bounds on the same feature are merged.
std::vector<TreeRule> extract_rules(const DecisionTree& tree);

/// Rule evaluation on a complete row (no NaNs) encoded against the tree schema.
bool rule_matches(const TreeRule& rule, const Eigen::Ref<const Eigen::RowVectorXd>& row);

std::string format_condition(const RuleCondition& c, const FeatureSchema& schema);
std::string rules_to_text(const std::vector<TreeRule>& rules, const FeatureSchema& schema);
std::string rules_to_csv(const std::vector<TreeRule>& rules, const FeatureSchema& schema);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

nlohmann::json tree_to_json(const DecisionTree& tree);
std::string serialize_tree(const DecisionTree& tree);
/// Throws FormatError (with a location) on malformed input and
/// VersionError on an unsupported version field.
DecisionTree tree_from_json(const nlohmann::json& j);
DecisionTree deserialize_tree(const std::string& text);

nlohmann::json params_to_json(const TreeParams& p);
TreeParams params_from_json(const nlohmann::json& j, int k);

}  // namespace casemix::tree
