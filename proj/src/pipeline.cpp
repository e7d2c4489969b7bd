#include "casemix/pipeline.hpp"

#include "casemix/csv.hpp"
#include "casemix/hash.hpp"
#include "casemix/random.hpp"
#include "casemix/version.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace casemix::pipeline {

using nlohmann::json;

namespace {

double factor_value(const PatientRecord& r, std::size_t f) {
  switch (f) {
    case 0: return r.los();
    case 1: return r.cost();
    default: return r.tbsa();
  }
}

template <typename T>
std::vector<T> gather(std::span<const T> values, std::span<const int> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(values[i]);
  return out;
}

Dataset subset(const Dataset& ds, std::span<const int> idx) {
  Dataset out;
  out.extra_schema = ds.extra_schema;
  out.records.reserve(idx.size());
  for (int i : idx) out.records.push_back(ds.records[i]);
  return out;
}

std::string cohort_text(const Dataset& ds) {
  std::ostringstream os;
  csv::write_cohort(os, ds);
  return os.str();
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void check_tree_loss(const tree::TreeParams& p, int k, const char* which) {
  if (p.loss.k() != k) throw std::invalid_argument(std::string(which) + ": loss matrix size does not match k");
  p.validate();
}

}  // namespace

void PipelineConfig::validate() const {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::invalid_argument("split_fraction must lie strictly between 0 and 1");
  }
  if (importance_top_m < 1) throw std::invalid_argument("importance_top_m must be >= 1");
  if (kmeans_restarts < 1 || kmeans_max_iter < 1) {
    throw std::invalid_argument("kmeans_restarts and kmeans_max_iter must be >= 1");
  }
  std::set<std::string> f(factors.begin(), factors.end());
  if (factors.size() != 3 || f != std::set<std::string>(kFactors.begin(), kFactors.end())) {
    throw std::invalid_argument("factors must be exactly los_days, total_cost, tbsa_pct");
  }
  check_tree_loss(factor_tree, k, "factor_tree");
  check_tree_loss(final_tree, k, "final_tree");
}

json to_json(const PipelineConfig& c) {
  json pre;
  preprocess::to_json(pre, c.preprocess);
  return json{{"k", c.k},
              {"factors", c.factors},
              {"split_fraction", c.split_fraction},
              {"importance_top_m", c.importance_top_m},
              {"oversample", c.oversample},
              {"seeds", {{"clustering", c.seeds.clustering}, {"split", c.seeds.split}, {"oversample", c.seeds.oversample}}},
              {"factor_tree", tree::params_to_json(c.factor_tree)},
              {"final_tree", tree::params_to_json(c.final_tree)},
              {"preprocess", pre},
              {"kmeans_restarts", c.kmeans_restarts},
              {"kmeans_max_iter", c.kmeans_max_iter},
              {"compare_zero_one", c.compare_zero_one}};
}

PipelineConfig config_from_json(const json& j, bool require_seeds) {
  if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    if (j.contains("k")) c.k = j.at("k").get<int>();
    if (c.k < 2) throw std::invalid_argument("k must be >= 2");
    if (j.contains("factors")) c.factors = j.at("factors").get<std::vector<std::string>>();
    if (j.contains("split_fraction")) c.split_fraction = j.at("split_fraction").get<double>();
    if (j.contains("importance_top_m")) c.importance_top_m = j.at("importance_top_m").get<int>();
    if (j.contains("oversample")) c.oversample = j.at("oversample").get<bool>();
    if (j.contains("kmeans_restarts")) c.kmeans_restarts = j.at("kmeans_restarts").get<int>();
    if (j.contains("kmeans_max_iter")) c.kmeans_max_iter = j.at("kmeans_max_iter").get<int>();
    if (j.contains("compare_zero_one")) c.compare_zero_one = j.at("compare_zero_one").get<bool>();
    const json empty = json::object();
    c.factor_tree = tree::params_from_json(j.value("factor_tree", empty), c.k);
    json final_tree = j.value("final_tree", empty);
    if (final_tree.is_object() && !final_tree.contains("cp")) final_tree["cp"] = 0.0;
    c.final_tree = tree::params_from_json(final_tree, c.k);
    if (j.contains("preprocess")) c.preprocess = preprocess::preprocess_config_from_json(j.at("preprocess"));
    const json seeds = j.value("seeds", empty);
    for (const char* key : {"clustering", "split", "oversample"}) {
      if (!seeds.contains(key)) {
        if (require_seeds) throw std::invalid_argument(std::string("missing explicit seeds.") + key);
        continue;
      }
      const auto v = seeds.at(key).get<std::uint64_t>();
      if (std::string_view(key) == "clustering") c.seeds.clustering = v;
      if (std::string_view(key) == "split") c.seeds.split = v;
      if (std::string_view(key) == "oversample") c.seeds.oversample = v;
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

std::array<std::vector<int>, 3> engineer_factor_targets(const Dataset& ds, const PipelineConfig& config) {
  std::array<std::vector<int>, 3> out;
  for (std::size_t f = 0; f < 3; ++f) {
    std::vector<double> values;
    values.reserve(ds.size());
    for (const auto& r : ds.records) values.push_back(factor_value(r, f));
    const KMeansOptions opts{config.kmeans_restarts, config.kmeans_max_iter,
                             rng::combine(config.seeds.clustering, f)};
    out[f] = cluster_factor(values, config.k, opts);
  }
  return out;
}

std::array<FactorModel, 3> train_factor_trees(const FeatureTable& table,
                                              const std::array<std::vector<int>, 3>& factor_labels,
                                              const PipelineConfig& config, int threads) {
  auto train_one = [&](std::size_t f) {
    std::vector<std::string> names;
    for (const auto& info : table.schema) {
      if (info.name == "los_days" || info.name == "total_cost" || info.name == kFactors[f]) continue;
      names.push_back(info.name);
    }
    const auto features = select_features(table, names);
    FactorModel m;
    m.tree = tree::build_tree(features, factor_labels[f], config.factor_tree);
    m.importance = tree::variable_importance(m.tree);
    return m;
  };
  std::array<FactorModel, 3> out;
  if (threads > 1) {
    std::array<std::future<FactorModel>, 3> jobs;
    for (std::size_t f = 0; f < 3; ++f) jobs[f] = std::async(std::launch::async, train_one, f);
    for (std::size_t f = 0; f < 3; ++f) out[f] = jobs[f].get();
  } else {
    for (std::size_t f = 0; f < 3; ++f) out[f] = train_one(f);
  }
  return out;
}

std::vector<std::string> select_final_features(const FeatureTable& table, const std::array<FactorModel, 3>& models,
                                               int top_m) {
  std::set<std::string> chosen = {"los_days", "tbsa_pct"};
  for (const auto& m : models) {
    for (std::size_t i = 0; i < m.importance.size() && i < static_cast<std::size_t>(top_m); ++i) {
      chosen.insert(m.importance[i].first);
    }
  }
  chosen.erase("total_cost");
  std::vector<std::string> out;
  for (const auto& info : table.schema) {
    if (chosen.contains(info.name)) out.push_back(info.name);
  }
  return out;
}

std::vector<double> mean_ranks(const std::array<std::vector<int>, 3>& factor_labels) {
  const auto n = factor_labels[0].size();
  if (factor_labels[1].size() != n || factor_labels[2].size() != n) {
    throw std::invalid_argument("mean_ranks: factor label vectors are not aligned");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<double>(factor_labels[0][i] + factor_labels[1][i] + factor_labels[2][i]) / 3.0;
  }
  return out;
}

std::vector<int> engineer_final_targets(const std::array<std::vector<int>, 3>& factor_labels,
                                        const PipelineConfig& config) {
  const auto mr = mean_ranks(factor_labels);
  const KMeansOptions opts{config.kmeans_restarts, config.kmeans_max_iter, rng::combine(config.seeds.clustering, 3)};
  return cluster_ranked_1d(mr, config.k, opts);
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(std::span<const int> labels, double fraction,
                                                               std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: fraction must lie strictly between 0 and 1");
  }
  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<int>(i));
  std::vector<int> train, test;
  for (auto& [label, idx] : members) {
    rng::Stream s(seed, {static_cast<std::uint64_t>(static_cast<std::int64_t>(label))});
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[s.below(i)]);
    const auto n = static_cast<long>(idx.size());
    long n_train = static_cast<long>(std::floor(fraction * static_cast<double>(n) + 0.5));
    n_train = n >= 2 ? std::clamp(n_train, 1L, n - 1) : n;
    train.insert(train.end(), idx.begin(), idx.begin() + n_train);
    test.insert(test.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::vector<int> oversample_duplicate(std::span<const int> indices, std::span<const int> labels,
                                      std::uint64_t seed) {
  if (indices.empty()) throw std::invalid_argument("oversample_duplicate: no classes to balance");
  std::map<int, std::vector<int>> members;
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= labels.size()) {
      throw std::invalid_argument("oversample_duplicate: index out of range");
    }
    members[labels[i]].push_back(i);
  }
  std::size_t majority = 0;
  for (const auto& [label, m] : members) majority = std::max(majority, m.size());
  std::vector<int> out(indices.begin(), indices.end());
  for (const auto& [label, m] : members) {
    rng::Stream s(seed, {static_cast<std::uint64_t>(static_cast<std::int64_t>(label))});
    for (std::size_t d = m.size(); d < majority; ++d) out.push_back(m[s.below(m.size())]);
  }
  return out;
}

PipelineResult run_pipeline(const Dataset& raw, const PipelineConfig& config, int threads) {
  PipelineResult res;
  stage("config", [&] {
    config.validate();
    return 0;
  });
  res.config = config;
  res.input_hash = sha256_hex(cohort_text(raw));

  stage("preprocess", [&] {
    auto [clean, report] = preprocess::run(raw, config.preprocess);
    if (!report.reconciles()) throw std::logic_error("row counts do not reconcile");
    if (clean.size() == 0) throw std::invalid_argument("no records left after cleaning");
    res.data = std::move(clean);
    res.preprocess_report = std::move(report);
    return 0;
  });

  res.factor_labels = stage("clustering", [&] { return engineer_factor_targets(res.data, config); });

  const FeatureTable table = make_feature_table(res.data);
  res.factor_models = stage("factor_trees", [&] { return train_factor_trees(table, res.factor_labels, config, threads); });
  res.final_features = select_final_features(table, res.factor_models, config.importance_top_m);

  res.mean_rank = mean_ranks(res.factor_labels);
  res.final_labels = stage("final_targets", [&] { return engineer_final_targets(res.factor_labels, config); });

  stage("split", [&] {
    auto [train, test] = stratified_split(res.final_labels, config.split_fraction, config.seeds.split);
    res.train_index = std::move(train);
    res.test_index = std::move(test);
    return 0;
  });

  stage("oversample", [&] {
    if (config.oversample) {
      res.train_rows = oversample_duplicate(res.train_index, res.final_labels, rng::combine(config.seeds.oversample, 0));
      res.test_rows = res.test_index.empty()
                          ? std::vector<int>{}
                          : oversample_duplicate(res.test_index, res.final_labels,
                                                 rng::combine(config.seeds.oversample, 1));
    } else {
      res.train_rows = res.train_index;
      res.test_rows = res.test_index;
    }
    const std::set<int> train_set(res.train_rows.begin(), res.train_rows.end());
    for (int i : res.test_rows) {
      if (train_set.contains(i)) throw std::logic_error("leakage: test record " + std::to_string(i) + " in training rows");
    }
    return 0;
  });

  const FeatureTable final_table = select_features(table, res.final_features);
  auto train_table = [&] {
    FeatureTable t;
    t.schema = final_table.schema;
    t.values = final_table.values(res.train_rows, Eigen::all);
    return t;
  }();
  const auto train_labels = gather<int>(res.final_labels, res.train_rows);

  res.final_tree = stage("final_tree", [&] { return tree::build_tree(train_table, train_labels, config.final_tree); });

  stage("evaluate", [&] {
    res.predictions = tree::predict(res.final_tree, final_table);
    const auto& loss = config.final_tree.loss;
    res.test_confusion = evaluate::confusion(gather<int>(res.final_labels, res.test_index),
                                             gather<int>(res.predictions, res.test_index), loss);
    res.test_confusion_oversampled = evaluate::confusion(gather<int>(res.final_labels, res.test_rows),
                                                         gather<int>(res.predictions, res.test_rows), loss);
    if (config.compare_zero_one) {
      auto params = config.final_tree;
      params.loss = zero_one_cost_matrix(config.k);
      const auto baseline = tree::build_tree(train_table, train_labels, params);
      const auto pred = tree::predict(baseline, final_table);
      res.zero_one_test_confusion = evaluate::confusion(gather<int>(res.final_labels, res.test_index),
                                                        gather<int>(pred, res.test_index), loss);
    }
    return 0;
  });
  return res;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> render_artifacts(const PipelineResult& r) {
  std::map<std::string, std::string> out;
  out["config.json"] = to_json(r.config).dump(2) + "\n";
  {
    json j;
    preprocess::to_json(j, r.preprocess_report);
    out["preprocess_report.json"] = j.dump(2) + "\n";
  }
  out["preprocessed.csv"] = cohort_text(r.data);
  {
    std::ostringstream os;
    csv::write_row(os, {"id", "los_days_rank", "total_cost_rank", "tbsa_pct_rank", "mean_rank"});
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      csv::write_row(os, {r.data.records[i].id, std::to_string(r.factor_labels[0][i]),
                          std::to_string(r.factor_labels[1][i]), std::to_string(r.factor_labels[2][i]),
                          csv::format_double(r.mean_rank[i])});
    }
    out["factor_labels.csv"] = os.str();
  }
  {
    std::ostringstream os;
    csv::write_row(os, {"model", "rank", "feature", "score", "selected_for_final"});
    const std::set<std::string> selected(r.final_features.begin(), r.final_features.end());
    for (std::size_t f = 0; f < 3; ++f) {
      const auto& imp = r.factor_models[f].importance;
      for (std::size_t i = 0; i < imp.size(); ++i) {
        csv::write_row(os, {kFactors[f], std::to_string(i + 1), imp[i].first, csv::format_double(imp[i].second),
                            selected.contains(imp[i].first) ? "yes" : "no"});
      }
    }
    const auto final_imp = tree::variable_importance(r.final_tree);
    for (std::size_t i = 0; i < final_imp.size(); ++i) {
      csv::write_row(os, {"final", std::to_string(i + 1), final_imp[i].first,
                          csv::format_double(final_imp[i].second), "yes"});
    }
    out["importances.csv"] = os.str();
  }
  {
    std::ostringstream os;
    csv::write_row(os, {"id", "final_rank", "predicted_rank"});
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      csv::write_row(os, {r.data.records[i].id, std::to_string(r.final_labels[i]), std::to_string(r.predictions[i])});
    }
    out["final_labels.csv"] = os.str();
  }
  {
    std::vector<int> train_mult(r.data.size(), 0), test_mult(r.data.size(), 0);
    for (int i : r.train_rows) ++train_mult[i];
    for (int i : r.test_rows) ++test_mult[i];
    std::vector<char> side(r.data.size(), '?');
    for (int i : r.train_index) side[i] = 'r';
    for (int i : r.test_index) side[i] = 'e';
    std::ostringstream os;
    csv::write_row(os, {"index", "id", "set", "multiplicity"});
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      const bool train = side[i] == 'r';
      csv::write_row(os, {std::to_string(i), r.data.records[i].id, train ? "train" : "test",
                          std::to_string(train ? train_mult[i] : test_mult[i])});
    }
    out["split.csv"] = os.str();
  }
  out["model.json"] = tree::serialize_tree(r.final_tree);
  for (std::size_t f = 0; f < 3; ++f) {
    out["factor_model_" + kFactors[f] + ".json"] = tree::serialize_tree(r.factor_models[f].tree);
  }
  const auto rules = tree::extract_rules(r.final_tree);
  out["rules.txt"] = tree::rules_to_text(rules, r.final_tree.schema);
  out["rules.csv"] = tree::rules_to_csv(rules, r.final_tree.schema);
  {
    json m = {{"test", r.test_confusion},
              {"test_oversampled", r.test_confusion_oversampled},
              {"final_features", r.final_features},
              {"tree_depth", r.final_tree.depth()},
              {"tree_leaves", r.final_tree.leaf_count()}};
    if (r.zero_one_test_confusion) m["zero_one_baseline_test"] = *r.zero_one_test_confusion;
    out["metrics.json"] = m.dump(2) + "\n";
  }
  return out;
}

json provenance(const PipelineResult& r, const std::map<std::string, std::string>& artifacts) {
  json hashes = json::object();
  for (const auto& [name, content] : artifacts) hashes[name] = sha256_hex(content);
  return json{{"tool_version", kToolVersion},
              {"config", to_json(r.config)},
              {"input_hash", r.input_hash},
              {"rows_in", r.preprocess_report.rows_in},
              {"rows_out", r.preprocess_report.rows_out},
              {"final_features", r.final_features},
              {"artifacts", hashes}};
}

void write_result_dir(const PipelineResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto artifacts = render_artifacts(r);
  auto write = [&](const std::string& name, const std::string& content) {
    const auto path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write " + path.string());
    out << content;
    if (!out) throw std::ios_base::failure("write failed for " + path.string());
  };
  for (const auto& [name, content] : artifacts) write(name, content);
  write("provenance.json", provenance(r, artifacts).dump(2) + "\n");
}

std::vector<std::string> replay_mismatches(const Dataset& raw, const json& prov) {
  std::vector<std::string> out;
  if (sha256_hex(cohort_text(raw)) != prov.at("input_hash").get<std::string>()) out.push_back("input");
  const auto config = config_from_json(prov.at("config"));
  const auto artifacts = render_artifacts(run_pipeline(raw, config));
  const auto& hashes = prov.at("artifacts");
  for (const auto& [name, content] : artifacts) {
    if (!hashes.contains(name) || hashes.at(name).get<std::string>() != sha256_hex(content)) out.push_back(name);
  }
  for (const auto& [name, h] : hashes.items()) {
    if (!artifacts.contains(name)) out.push_back(name);
  }
  return out;
}

// ---------------------------------------------------------------------------

RunEvaluation evaluate_run(const Dataset& data, std::span<const int> final_labels, std::span<const int> predictions,
                           std::span<const int> train_index, std::span<const int> test_index,
                           std::span<const int> rule_labels, int k, const CostMatrix& loss) {
  if (final_labels.size() != data.size() || predictions.size() != data.size() || rule_labels.size() != data.size()) {
    throw std::invalid_argument("evaluate_run: labelings are not aligned with the records");
  }
  RunEvaluation e;
  const Dataset train = subset(data, train_index);
  const Dataset test = subset(data, test_index);
  const auto train_rules = gather(rule_labels, train_index);
  const auto test_rules = gather(rule_labels, test_index);
  e.train_targets = evaluate::compare_groupings(train, gather(final_labels, train_index), train_rules);
  e.train_predicted = evaluate::compare_groupings(train, gather(predictions, train_index), train_rules);
  const auto test_pred = gather(predictions, test_index);
  e.test_confusion = evaluate::confusion(gather(final_labels, test_index), test_pred, loss);
  e.test_predicted = evaluate::compare_groupings(test, test_pred, test_rules, e.test_confusion);
  for (std::size_t f = 0; f < 3; ++f) {
    std::vector<double> values;
    for (const auto& r : test.records) values.push_back(factor_value(r, f));
    e.learned_boxplots[f] = evaluate::boxplot_stats(values, test_pred, k);
    e.rules_boxplots[f] = evaluate::boxplot_stats(values, test_rules, k);
  }
  return e;
}

json to_json(const RunEvaluation& e) {
  json box = json::object();
  for (std::size_t f = 0; f < 3; ++f) {
    box[kFactors[f]] = {{"learned", e.learned_boxplots[f]}, {"rules", e.rules_boxplots[f]}};
  }
  return json{{"train_targets", e.train_targets},
              {"train_predicted", e.train_predicted},
              {"test_predicted", e.test_predicted},
              {"test_confusion", e.test_confusion},
              {"test_boxplots", box}};
}

}  // namespace casemix::pipeline
