#pragma once
// End-to-end grouping pipeline:
//   clean -> per-factor ranked targets (LOS, cost, TBSA) -> factor trees and
//   their variable importances -> mean-rank final targets -> stratified
//   split -> oversampling -> final cost-sensitive tree -> evaluation.

#include "casemix/core.hpp"
#include "casemix/evaluate.hpp"
#include "casemix/features.hpp"
#include "casemix/kmeans.hpp"
#include "casemix/preprocess.hpp"
#include "casemix/tree.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace casemix::pipeline {

/// Order in which factor-indexed arrays are stored.
inline const std::array<std::string, 3> kFactors = {"los_days", "total_cost", "tbsa_pct"};

struct Seeds {
  std::uint64_t clustering = 0;
  std::uint64_t split = 0;
  std::uint64_t oversample = 0;
};

struct PipelineConfig {
  static tree::TreeParams unpruned() {
    tree::TreeParams p;
    p.cp = 0.0;
    return p;
  }

  int k = kDefaultClassCount;
  std::vector<std::string> factors = {kFactors.begin(), kFactors.end()};
  double split_fraction = 0.7;
  int importance_top_m = 10;
  bool oversample = true;
  Seeds seeds;
  tree::TreeParams factor_tree;
  // Grown without cost-complexity pruning unless the config sets "cp".
  tree::TreeParams final_tree = unpruned();
  preprocess::PreprocessConfig preprocess;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 300;
  bool compare_zero_one = true;

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Missing fields take defaults, except that all three seeds are required
/// when `require_seeds` is set.
PipelineConfig config_from_json(const nlohmann::json& j, bool require_seeds = true);

/// Raised by run_pipeline; `stage()` names the step that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

using Importance = std::vector<std::pair<std::string, double>>;

struct FactorModel {
  tree::DecisionTree tree;
  Importance importance;
};

struct PipelineResult {
  PipelineConfig config;
  preprocess::PreprocessReport preprocess_report;
  Dataset data;                                // cleaned cohort the labels refer to
  std::array<std::vector<int>, 3> factor_labels;  // kFactors order
  std::array<FactorModel, 3> factor_models;
  std::vector<std::string> final_features;
  std::vector<double> mean_rank;
  std::vector<int> final_labels;
  std::vector<int> train_index;  // ascending, unique
  std::vector<int> test_index;   // ascending, unique
  std::vector<int> train_rows;   // after oversampling (multiset)
  std::vector<int> test_rows;
  tree::DecisionTree final_tree;
  std::vector<int> predictions;  // final tree on every cleaned record
  evaluate::ConfusionSummary test_confusion;              // unique test records
  evaluate::ConfusionSummary test_confusion_oversampled;  // oversampled test rows
  std::optional<evaluate::ConfusionSummary> zero_one_test_confusion;
  std::string input_hash;
};

// Individual stages -----------------------------------------------------------

std::array<std::vector<int>, 3> engineer_factor_targets(const Dataset& ds, const PipelineConfig& config);

/// One tree per factor. Each excludes raw LOS, raw cost and its own factor.
std::array<FactorModel, 3> train_factor_trees(const FeatureTable& table,
                                              const std::array<std::vector<int>, 3>& factor_labels,
                                              const PipelineConfig& config, int threads = 1);

/// Union of each factor model's top-m features plus LOS and TBSA, minus raw
/// cost, in table column order.
std::vector<std::string> select_final_features(const FeatureTable& table, const std::array<FactorModel, 3>& models,
                                               int top_m);

std::vector<double> mean_ranks(const std::array<std::vector<int>, 3>& factor_labels);

std::vector<int> engineer_final_targets(const std::array<std::vector<int>, 3>& factor_labels,
                                        const PipelineConfig& config);

/// Per class: shuffle, send round(fraction * n) to train, keeping at least
/// one on each side for classes with >= 2 members. Singletons go to train.
std::pair<std::vector<int>, std::vector<int>> stratified_split(std::span<const int> labels, double fraction,
                                                               std::uint64_t seed);

/// Appends draws with replacement from each minority class until every class
/// matches the majority count. `indices` index into `labels`.
std::vector<int> oversample_duplicate(std::span<const int> indices, std::span<const int> labels,
                                      std::uint64_t seed);

PipelineResult run_pipeline(const Dataset& raw, const PipelineConfig& config, int threads = 1);

// Artifacts -----------------------------------------------------------------

/// File name -> content for every result file except provenance.json.
std::map<std::string, std::string> render_artifacts(const PipelineResult& result);
nlohmann::json provenance(const PipelineResult& result, const std::map<std::string, std::string>& artifacts);
void write_result_dir(const PipelineResult& result, const std::string& dir);

/// Re-runs the pipeline from a provenance document and reports artifacts
/// whose hash differs (empty == exact replay).
std::vector<std::string> replay_mismatches(const Dataset& raw, const nlohmann::json& provenance);

// Evaluation ----------------------------------------------------------------

struct RunEvaluation {
  evaluate::GroupingComparison train_targets;    // engineered targets vs rules, train records
  evaluate::GroupingComparison train_predicted;  // tree predictions vs rules, train records
  evaluate::GroupingComparison test_predicted;   // tree predictions vs rules, test records
  evaluate::ConfusionSummary test_confusion;
  std::array<evaluate::BoxplotReport, 3> learned_boxplots;  // test, kFactors order
  std::array<evaluate::BoxplotReport, 3> rules_boxplots;
};

/// `rule_labels` aligned with `data.records`.
RunEvaluation evaluate_run(const Dataset& data, std::span<const int> final_labels,
                           std::span<const int> predictions, std::span<const int> train_index,
                           std::span<const int> test_index, std::span<const int> rule_labels, int k,
                           const CostMatrix& loss);

nlohmann::json to_json(const RunEvaluation& e);

}  // namespace casemix::pipeline
