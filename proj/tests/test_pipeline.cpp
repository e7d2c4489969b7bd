#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "casemix/pipeline.hpp"
#include "casemix/random.hpp"
#include "casemix/synth.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <set>

using namespace casemix;
using namespace casemix::pipeline;

namespace {

PipelineConfig seeded_config() {
  PipelineConfig c;
  c.seeds = {1, 2, 3};
  return c;
}

const Dataset& small_cohort() {
  static const Dataset ds = [] {
    synth::CohortConfig c;
    c.n = 1500;
    c.seed = 11;
    return synth::generate_cohort(c);
  }();
  return ds;
}

const PipelineResult& small_run() {
  static const PipelineResult r = run_pipeline(small_cohort(), seeded_config());
  return r;
}

std::map<int, std::size_t> histogram(std::span<const int> idx, std::span<const int> labels) {
  std::map<int, std::size_t> h;
  for (int i : idx) ++h[labels[i]];
  return h;
}

}  // namespace

// --- target engineering -------------------------------------------------------

TEST_CASE("factor targets recover separable tiers") {
  Dataset ds;
  const auto k = 4;
  for (int t = 0; t < k; ++t) {
    for (int i = 0; i < 10; ++i) {
      ds.records.push_back(testing::make_record("t" + std::to_string(t) + "_" + std::to_string(i),
                                                1 + t * 20 + i * 0.1, 1 + t * 50, std::pow(10.0, 2 + t) + i));
    }
  }
  auto c = seeded_config();
  c.k = k;
  const auto labels = engineer_factor_targets(ds, c);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const int tier = static_cast<int>(r / 10) + 1;
    CHECK(labels[0][r] == tier);
    CHECK(labels[1][r] == tier);
    CHECK(labels[2][r] == tier);
  }
}

TEST_CASE("constant factor with k > 1 is rejected") {
  Dataset ds;
  for (int i = 0; i < 20; ++i) ds.records.push_back(testing::make_record("r" + std::to_string(i), i + 1, i + 1, 500));
  auto c = seeded_config();
  c.k = 3;
  CHECK_THROWS_AS(engineer_factor_targets(ds, c), std::invalid_argument);
}

TEST_CASE("mean ranks and final targets") {
  std::array<std::vector<int>, 3> f = {std::vector<int>{1, 13}, std::vector<int>{2, 13}, std::vector<int>{3, 13}};
  const auto mr = mean_ranks(f);
  CHECK(mr[0] == doctest::Approx(2.0));
  CHECK(mr[1] == doctest::Approx(13.0));
  f[2].pop_back();
  CHECK_THROWS_AS(mean_ranks(f), std::invalid_argument);

  auto c = seeded_config();
  c.k = 1;
  const std::array<std::vector<int>, 3> same = {std::vector<int>(5, 4), std::vector<int>(5, 4), std::vector<int>(5, 4)};
  CHECK(engineer_final_targets(same, c) == std::vector<int>(5, 1));
}

TEST_CASE("the record with the top mean rank lands in the top final class") {
  const auto& r = small_run();
  const auto top = std::max_element(r.mean_rank.begin(), r.mean_rank.end()) - r.mean_rank.begin();
  CHECK(r.final_labels[top] == r.config.k);
}

TEST_CASE("final ranks are monotone in mean rank") {
  const auto& r = small_run();
  std::vector<std::size_t> order(r.mean_rank.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.mean_rank[a] < r.mean_rank[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (r.mean_rank[order[i]] > r.mean_rank[order[i - 1]]) {
      CHECK(r.final_labels[order[i]] >= r.final_labels[order[i - 1]]);
    } else {
      CHECK(r.final_labels[order[i]] == r.final_labels[order[i - 1]]);
    }
  }
}

TEST_CASE("factor ranks are monotone in the raw factor values") {
  const auto& r = small_run();
  for (std::size_t f = 0; f < 3; ++f) {
    std::vector<std::pair<double, int>> v;
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      const auto& rec = r.data.records[i];
      const double x = f == 0 ? rec.los() : f == 1 ? rec.cost() : rec.tbsa();
      v.emplace_back(x, r.factor_labels[f][i]);
    }
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) {
      CHECK(v[i].second >= v[i - 1].second);
      if (v[i].first == v[i - 1].first) CHECK(v[i].second == v[i - 1].second);
    }
  }
}

// --- split and oversampling ---------------------------------------------------

TEST_CASE("stratified split examples") {
  std::vector<int> labels;
  for (int c = 1; c <= 3; ++c) labels.insert(labels.end(), 10, c);
  labels.push_back(4);
  const auto [train, test] = stratified_split(labels, 0.7, 5);
  const auto htr = histogram(train, labels);
  const auto hte = histogram(test, labels);
  for (int c = 1; c <= 3; ++c) {
    CHECK(htr.at(c) == 7);
    CHECK(hte.at(c) == 3);
  }
  CHECK(htr.at(4) == 1);
  CHECK_FALSE(hte.contains(4));
  CHECK(stratified_split(labels, 0.7, 5) == std::make_pair(train, test));
  CHECK(stratified_split(labels, 0.7, 6) != std::make_pair(train, test));
  CHECK_THROWS_AS(stratified_split(labels, 1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(stratified_split(labels, 0.0, 5), std::invalid_argument);
}

TEST_CASE("stratified split is disjoint, exhaustive and keeps both sides populated") {
  rng::Stream s(61, {});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(1 + s.below(80));
    for (auto& l : labels) l = 1 + static_cast<int>(s.below(6));
    const double fraction = 0.05 + 0.9 * s.uniform();
    const auto [train, test] = stratified_split(labels, fraction, trial);
    std::vector<int> all = train;
    all.insert(all.end(), test.begin(), test.end());
    std::sort(all.begin(), all.end());
    std::vector<int> expect(labels.size());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    const auto htr = histogram(train, labels);
    const auto hte = histogram(test, labels);
    for (const auto& [c, n] : histogram(expect, labels)) {
      if (n >= 2) {
        CHECK(htr.contains(c));
        CHECK(hte.contains(c));
      }
    }
  }
}

TEST_CASE("oversampling examples") {
  std::vector<int> labels(13, 1);
  for (int i = 10; i < 13; ++i) labels[i] = 2;
  std::vector<int> idx(13);
  std::iota(idx.begin(), idx.end(), 0);
  const auto out = oversample_duplicate(idx, labels, 9);
  const auto h = histogram(out, labels);
  CHECK(h.at(1) == 10);
  CHECK(h.at(2) == 10);
  CHECK(std::vector<int>(out.begin(), out.begin() + 13) == idx);
  for (std::size_t i = 13; i < out.size(); ++i) CHECK(labels[out[i]] == 2);
  CHECK(oversample_duplicate(idx, labels, 9) == out);

  const std::vector<int> balanced = {0, 1, 10, 11};
  CHECK(oversample_duplicate(balanced, labels, 9) == balanced);
  CHECK_THROWS_AS(oversample_duplicate({}, labels, 9), std::invalid_argument);
}

TEST_CASE("oversampled histograms are uniform at the majority count") {
  rng::Stream s(62, {});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(5 + s.below(100));
    for (auto& l : labels) l = 1 + static_cast<int>(s.below(1 + s.below(8)));
    std::vector<int> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto before = histogram(idx, labels);
    std::size_t majority = 0;
    for (const auto& [c, n] : before) majority = std::max(majority, n);
    for (const auto& [c, n] : histogram(oversample_duplicate(idx, labels, trial), labels)) CHECK(n == majority);
  }
}

// --- whole runs -----------------------------------------------------------------

TEST_CASE("pipeline run: classes, split, oversampling and leakage") {
  const auto& r = small_run();
  CHECK(r.preprocess_report.reconciles());
  CHECK(r.final_labels.size() == r.data.size());
  std::set<int> classes(r.final_labels.begin(), r.final_labels.end());
  CHECK(classes.size() == 13);
  CHECK(*classes.begin() == 1);
  CHECK(*classes.rbegin() == 13);

  std::set<int> train(r.train_index.begin(), r.train_index.end());
  for (int i : r.test_index) CHECK_FALSE(train.contains(i));
  CHECK(r.train_index.size() + r.test_index.size() == r.data.size());
  for (int i : r.test_rows) CHECK_FALSE(train.contains(i));

  for (auto rows : {std::span<const int>(r.train_rows), std::span<const int>(r.test_rows)}) {
    const auto h = histogram(rows, r.final_labels);
    CHECK(h.size() == 13);
    for (const auto& [c, n] : h) CHECK(n == h.begin()->second);
  }

  CHECK(std::find(r.final_features.begin(), r.final_features.end(), "total_cost") == r.final_features.end());
  CHECK(std::find(r.final_features.begin(), r.final_features.end(), "los_days") != r.final_features.end());
  CHECK(std::find(r.final_features.begin(), r.final_features.end(), "tbsa_pct") != r.final_features.end());
  CHECK(r.predictions.size() == r.data.size());
  CHECK(r.test_confusion.total == r.test_index.size());
  CHECK(r.test_confusion_oversampled.total == r.test_rows.size());
  CHECK(r.zero_one_test_confusion.has_value());
}

TEST_CASE("factor trees never see raw LOS, raw cost or their own factor") {
  const auto& r = small_run();
  for (std::size_t f = 0; f < 3; ++f) {
    for (const auto& info : r.factor_models[f].tree.schema) {
      CHECK(info.name != "los_days");
      CHECK(info.name != "total_cost");
      CHECK(info.name != kFactors[f]);
    }
    CHECK_FALSE(r.factor_models[f].importance.empty());
  }
}

TEST_CASE("runs are deterministic and independent of the thread count") {
  const auto a = render_artifacts(small_run());
  const auto b = render_artifacts(run_pipeline(small_cohort(), seeded_config(), 3));
  CHECK(a == b);
  auto c = seeded_config();
  c.seeds.split = 99;
  CHECK(render_artifacts(run_pipeline(small_cohort(), c)) != a);
}

TEST_CASE("provenance replays every artifact hash") {
  const auto& r = small_run();
  const auto prov = provenance(r, render_artifacts(r));
  CHECK(prov.contains("input_hash"));
  CHECK(replay_mismatches(small_cohort(), prov).empty());

  Dataset altered = small_cohort();
  altered.records.pop_back();
  CHECK_FALSE(replay_mismatches(altered, prov).empty());
}

TEST_CASE("result directory holds the documented files") {
  const auto dir = testing::temp_dir("pipeline");
  write_result_dir(small_run(), dir.string());
  for (const char* f : {"config.json", "provenance.json", "factor_labels.csv", "importances.csv", "final_labels.csv",
                        "model.json", "split.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto model = tree::deserialize_tree(testing::slurp(dir / "model.json"));
  CHECK(model.nodes == small_run().final_tree.nodes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config validation and stage-tagged failures") {
  auto c = seeded_config();
  c.split_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  try {
    run_pipeline(small_cohort(), c);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
  }

  c = seeded_config();
  c.importance_top_m = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  Dataset tiny;
  for (int i = 0; i < 5; ++i) tiny.records.push_back(testing::make_record("r" + std::to_string(i), i + 1, i + 1, 100 * (i + 1)));
  try {
    run_pipeline(tiny, seeded_config());
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "clustering");
  }

  Dataset empty;
  try {
    run_pipeline(empty, seeded_config());
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "preprocess");
  }
}

TEST_CASE("config JSON round-trip and seed requirements") {
  const auto c = seeded_config();
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  auto no_seed = j;
  no_seed["seeds"].erase("split");
  CHECK_THROWS_AS(config_from_json(no_seed), std::invalid_argument);
  CHECK_NOTHROW(config_from_json(no_seed, false));
  CHECK(config_from_json(nlohmann::json{{"seeds", {{"clustering", 1}, {"split", 2}, {"oversample", 3}}}}).final_tree.cp == 0.0);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"k", 1}}, false), std::invalid_argument);
}
