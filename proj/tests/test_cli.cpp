#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>

namespace fs = std::filesystem;
using casemix::testing::run_cli;
using casemix::testing::slurp;
using casemix::testing::spit;
using nlohmann::json;

namespace {

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const json kPipeline = {{"k", 13}, {"seeds", {{"clustering", 1}, {"split", 2}, {"oversample", 3}}}};

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct Fixture {
  fs::path dir = casemix::testing::temp_dir("cli");
  fs::path cohort_cfg = dir / "cohort.json";
  fs::path pipeline_cfg = dir / "pipeline.json";
  fs::path cohort = dir / "cohort.csv";

  Fixture() {
    spit(cohort_cfg, json{{"n", 800}, {"seed", 5}}.dump());
    spit(pipeline_cfg, kPipeline.dump());
  }
  ~Fixture() { fs::remove_all(dir); }

  void generate() { REQUIRE(run_cli("generate --config " + q(cohort_cfg) + " --out " + q(cohort)).code == 0); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "generate writes n rows plus a header, deterministically") {
  generate();
  const auto first = slurp(cohort);
  CHECK(line_count(first) == 801);
  CHECK(fs::exists(dir / "cohort.csv.manifest.json"));
  const auto manifest = json::parse(slurp(dir / "cohort.csv.manifest.json"));
  CHECK(manifest["command"] == "generate");
  CHECK(manifest.contains("tool_version"));
  CHECK(manifest["outputs"].size() == 1);
  generate();
  CHECK(slurp(cohort) == first);
}

TEST_CASE_FIXTURE(Fixture, "configuration errors exit with 2") {
  CHECK(run_cli("generate --config " + q(dir / "missing.json") + " --out " + q(cohort)).code == 2);
  spit(dir / "broken.json", "{\"n\": ");
  CHECK(run_cli("generate --config " + q(dir / "broken.json") + " --out " + q(cohort)).code == 2);
  spit(dir / "neg.json", json{{"n", -1}, {"seed", 1}}.dump());
  CHECK(run_cli("generate --config " + q(dir / "neg.json") + " --out " + q(cohort)).code == 2);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("generate --config").code == 2);
  CHECK(run_cli("--threads 0 generate --config " + q(cohort_cfg) + " --out " + q(cohort)).code == 2);
}

TEST_CASE_FIXTURE(Fixture, "seeds are required unless --ephemeral") {
  spit(dir / "noseed.json", json{{"n", 50}}.dump());
  const auto refused = run_cli("generate --config " + q(dir / "noseed.json") + " --out " + q(cohort));
  CHECK(refused.code == 2);
  CHECK(refused.output.find("--ephemeral") != std::string::npos);
  CHECK(run_cli("--ephemeral generate --config " + q(dir / "noseed.json") + " --out " + q(cohort)).code == 0);
  const auto manifest = json::parse(slurp(dir / "cohort.csv.manifest.json"));
  CHECK(manifest["effective_config"].contains("seed"));

  generate();
  spit(dir / "p_noseed.json", json{{"k", 13}}.dump());
  CHECK(run_cli("train --cohort " + q(cohort) + " --config " + q(dir / "p_noseed.json") + " --out " + q(dir / "r"))
            .code == 2);
}

TEST_CASE_FIXTURE(Fixture, "IO failures exit with 3") {
  spit(dir / "blocker", "file");
  CHECK(run_cli("generate --config " + q(cohort_cfg) + " --out " + q(dir / "blocker" / "x.csv")).code == 3);
}

TEST_CASE_FIXTURE(Fixture, "hrg labels one row per record, rejects bad rulesets, accepts empty cohorts") {
  generate();
  const auto labels = dir / "labels.csv";
  REQUIRE(run_cli("hrg --cohort " + q(cohort) + " --out " + q(labels)).code == 0);
  const auto text = slurp(labels);
  CHECK(line_count(text) == 801);
  CHECK(text.rfind("id,hrg\n", 0) == 0);
  CHECK(fs::exists(dir / "labels.csv.histogram.csv"));

  spit(dir / "partial.json",
       json{{"k", 13},
            {"rules", {{{"target_rank", 1}, {"conditions", {{{"feature", "tbsa_pct"}, {"op", "<"}, {"value", 5}}}}}}}}
           .dump());
  const auto bad = run_cli("hrg --cohort " + q(cohort) + " --ruleset " + q(dir / "partial.json") + " --out " +
                           q(dir / "bad.csv"));
  CHECK(bad.code == 2);

  const auto header = text.substr(0, 0) + slurp(cohort).substr(0, slurp(cohort).find('\n') + 1);
  spit(dir / "empty.csv", header);
  REQUIRE(run_cli("hrg --cohort " + q(dir / "empty.csv") + " --out " + q(dir / "empty_labels.csv")).code == 0);
  CHECK(slurp(dir / "empty_labels.csv") == "id,hrg\n");
}

TEST_CASE_FIXTURE(Fixture, "train and evaluate") {
  generate();
  const auto result = dir / "result";
  REQUIRE(run_cli("train --cohort " + q(cohort) + " --config " + q(pipeline_cfg) + " --out " + q(result)).code == 0);
  CHECK(fs::exists(result / "model.json"));
  CHECK(fs::exists(result / "final_labels.csv"));
  CHECK(fs::exists(result / "manifest.json"));
  const auto model = slurp(result / "model.json");

  const auto again = dir / "again";
  REQUIRE(run_cli("--threads 3 train --cohort " + q(cohort) + " --config " + q(pipeline_cfg) + " --out " + q(again))
              .code == 0);
  CHECK(slurp(again / "model.json") == model);

  const auto labels = dir / "labels.csv";
  REQUIRE(run_cli("hrg --cohort " + q(cohort) + " --out " + q(labels)).code == 0);
  const auto report = dir / "report";
  REQUIRE(run_cli("evaluate --result " + q(result) + " --hrg " + q(labels) + " --out " + q(report) + " --svg").code ==
          0);
  const auto cmp = json::parse(slurp(report / "comparison.json"));
  CHECK(cmp.contains("verdict"));
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(report)) {
    if (e.path().extension() == ".svg") {
      ++svgs;
      const auto s = slurp(e.path());
      CHECK(s.find("<svg") != std::string::npos);
      CHECK(s.find("</svg>") != std::string::npos);
    }
  }
  CHECK(svgs >= 5);
  for (const char* f : {"variance.csv", "confusion.csv", "boxplots.csv", "rules.txt", "manifest.json"}) {
    CHECK(fs::exists(report / f));
  }

  // Truncated labels file.
  auto text = slurp(labels);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  spit(dir / "short.csv", text);
  CHECK(run_cli("evaluate --result " + q(result) + " --hrg " + q(dir / "short.csv") + " --out " + q(dir / "r2")).code ==
        2);
  spit(dir / "junk.csv", "id,hrg\nx,banana\n");
  CHECK(run_cli("evaluate --result " + q(result) + " --hrg " + q(dir / "junk.csv") + " --out " + q(dir / "r3")).code ==
        2);
}

TEST_CASE_FIXTURE(Fixture, "a stage failure exits with 4 and names the stage") {
  spit(dir / "small.json", json{{"n", 60}, {"seed", 5}}.dump());
  REQUIRE(run_cli("generate --config " + q(dir / "small.json") + " --out " + q(cohort)).code == 0);
  auto cfg = kPipeline;
  cfg["k"] = 200;
  spit(dir / "big_k.json", cfg.dump());
  const auto r = run_cli("train --cohort " + q(cohort) + " --config " + q(dir / "big_k.json") + " --out " +
                         q(dir / "result"));
  CHECK(r.code == 4);
  CHECK(r.output.find("stage clustering") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "all is byte-identical across runs and thread counts") {
  spit(dir / "all.json", json{{"cohort", {{"n", 600}, {"seed", 9}}}, {"pipeline", kPipeline}}.dump());
  REQUIRE(run_cli("all --config " + q(dir / "all.json") + " --out " + q(dir / "a") + " --svg").code == 0);
  REQUIRE(run_cli("--threads 4 all --config " + q(dir / "all.json") + " --out " + q(dir / "b") + " --svg").code == 0);
  const auto a = dir_contents(dir / "a");
  CHECK(a == dir_contents(dir / "b"));
  for (const char* f : {"cohort.csv", "hrg_labels.csv", "train/model.json", "evaluate/comparison.json", "manifest.json"}) {
    CHECK(a.contains(f));
  }
  const auto manifest = json::parse(a.at("manifest.json"));
  CHECK_FALSE(manifest.contains("wall_time"));
  CHECK(manifest["outputs"].contains("train/model.json"));
}
