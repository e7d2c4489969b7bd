// casemix: generate | hrg | train | evaluate | all
//
// Exit codes: 0 success, 2 bad config or input, 3 IO failure, 4 pipeline
// stage failure.

#include "casemix/csv.hpp"
#include "casemix/hash.hpp"
#include "casemix/hrg.hpp"
#include "casemix/pipeline.hpp"
#include "casemix/svg.hpp"
#include "casemix/synth.hpp"
#include "casemix/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace casemix;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  int threads = 1;
  bool ephemeral = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const std::string& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Write to a sibling temporary, then rename over the target.
void write_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Dataset load_cohort(const std::string& path) {
  std::istringstream in(read_text(path));
  try {
    return csv::read_cohort(in);
  } catch (const csv::ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string cohort_text(const Dataset& ds) {
  std::ostringstream os;
  csv::write_cohort(os, ds);
  return os.str();
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

synth::CohortConfig cohort_config(json j, const Options& opt) {
  if (!j.is_object()) throw InputError("cohort config must be a JSON object");
  if (!j.contains("seed")) {
    if (!opt.ephemeral) throw InputError("cohort config has no explicit seed (pass --ephemeral to draw one)");
    j["seed"] = fresh_seed();
  }
  return synth::cohort_config_from_json(j, true);
}

pipeline::PipelineConfig pipeline_config(json j, const Options& opt) {
  if (!j.is_object()) throw InputError("pipeline config must be a JSON object");
  if (opt.ephemeral) {
    auto& seeds = j["seeds"];
    if (!seeds.is_object()) seeds = json::object();
    for (const char* key : {"clustering", "split", "oversample"}) {
      if (!seeds.contains(key)) seeds[key] = fresh_seed();
    }
  }
  return pipeline::config_from_json(j, true);
}

json manifest(const std::string& command, const std::string& config_path, const json& effective_config,
              const std::map<std::string, std::string>& inputs, const std::map<std::string, std::string>& outputs) {
  json in = json::object(), out = json::object();
  for (const auto& [name, hash] : inputs) in[name] = hash;
  for (const auto& [name, hash] : outputs) out[name] = hash;
  json m = {{"command", command},
            {"tool_version", kToolVersion},
            {"effective_config", effective_config},
            {"inputs", in},
            {"outputs", out}};
  if (!config_path.empty()) m["config"] = {{"path", config_path}, {"sha256", sha256_file(config_path)}};
  return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct Generated {
  Dataset cohort;
  std::string text;
  json config;
};

Generated generate(const synth::CohortConfig& config) {
  Generated g;
  synth::to_json(g.config, config);
  g.cohort = synth::generate_cohort(config);
  g.text = cohort_text(g.cohort);
  return g;
}

struct HrgOutput {
  std::vector<hrg::Assignment> labels;
  std::string labels_csv;
  std::string histogram_csv;
};

// A column with no observed cells has no inferable kind; it takes the kind
// of the constants the rules compare it with.
ExtraSchema schema_for_rules(const Dataset& cohort, const hrg::Ruleset& rs) {
  ExtraSchema schema = cohort.extra_schema;
  for (auto& spec : schema) {
    const bool observed = std::any_of(cohort.records.begin(), cohort.records.end(),
                                      [&](const PatientRecord& r) { return r.extra_features.contains(spec.name); });
    if (observed) continue;
    for (const auto& rule : rs.rules) {
      for (const auto& c : rule.conditions) {
        if (c.feature != spec.name) continue;
        const auto& v = c.op == hrg::Op::in && !c.set.empty() ? c.set.front() : c.value;
        spec.kind = std::holds_alternative<std::string>(v) ? FeatureKind::categorical : FeatureKind::numeric;
      }
    }
  }
  return schema;
}

HrgOutput run_hrg(const Dataset& cohort, const hrg::Ruleset& rs) {
  const auto check = hrg::validate_ruleset(rs, schema_for_rules(cohort, rs));
  if (!check.ok()) {
    std::string msg = "invalid ruleset:";
    for (const auto& v : check.violations) msg += "\n  - " + v;
    throw InputError(msg);
  }
  for (const auto& w : check.warnings) std::cerr << "warning: " << w << "\n";
  const auto assigned = hrg::classify_dataset(cohort, rs);
  HrgOutput out;
  out.labels = assigned.labels;
  std::ostringstream labels, hist;
  csv::write_row(labels, {"id", "hrg"});
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& a = assigned.labels[i];
    csv::write_row(labels, {cohort.records[i].id, a ? std::to_string(*a) : "U"});
  }
  csv::write_row(hist, {"group", "count"});
  for (int r = 1; r <= rs.k; ++r) {
    const auto it = assigned.histogram.find(r);
    csv::write_row(hist, {std::to_string(r), std::to_string(it == assigned.histogram.end() ? 0 : it->second)});
  }
  csv::write_row(hist, {"U", std::to_string(assigned.unclassifiable)});
  out.labels_csv = labels.str();
  out.histogram_csv = hist.str();
  return out;
}

hrg::Ruleset load_ruleset(const std::string& path) {
  try {
    return hrg::ruleset_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
}

// id -> label text, in file order
std::vector<std::pair<std::string, std::string>> read_label_file(const std::string& path, const std::string& column) {
  std::istringstream in(read_text(path));
  std::vector<csv::Row> rows;
  try {
    rows = csv::read_rows(in);
  } catch (const csv::ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
  if (rows.empty()) throw InputError(path + ": missing header row");
  const auto& header = rows.front();
  const auto id_col = std::find(header.begin(), header.end(), "id") - header.begin();
  const auto val_col = std::find(header.begin(), header.end(), column) - header.begin();
  if (id_col == static_cast<long>(header.size()) || val_col == static_cast<long>(header.size())) {
    throw InputError(path + ": expected columns 'id' and '" + column + "'");
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) throw InputError(path + ": ragged row " + std::to_string(r + 1));
    out.emplace_back(rows[r][id_col], rows[r][val_col]);
  }
  return out;
}

int parse_rank(const std::string& s, int k, const std::string& where) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 1 || v > k) {
    throw InputError(where + ": label '" + s + "' is not a rank in [1, " + std::to_string(k) + "]");
  }
  return v;
}

std::map<std::string, std::string> evaluate_outputs(const fs::path& result_dir,
                                                    const std::vector<std::pair<std::string, std::string>>& hrg_rows,
                                                    bool want_svg) {
  const auto prov = read_json((result_dir / "provenance.json").string());
  const auto data = load_cohort((result_dir / "preprocessed.csv").string());
  const auto tree = [&] {
    try {
      return tree::deserialize_tree(read_text((result_dir / "model.json").string()));
    } catch (const std::exception& e) {
      throw InputError("model.json: " + std::string(e.what()));
    }
  }();
  const int k = tree.k();

  const auto rows_in = prov.at("rows_in").get<std::size_t>();
  if (hrg_rows.size() != rows_in) {
    throw InputError("HRG labels have " + std::to_string(hrg_rows.size()) + " rows but the trained cohort had " +
                     std::to_string(rows_in));
  }
  std::map<std::string, std::string> hrg_by_id;
  for (const auto& [id, label] : hrg_rows) {
    if (!hrg_by_id.emplace(id, label).second) throw InputError("HRG labels: duplicate id " + id);
  }

  const auto final_rows = read_label_file((result_dir / "final_labels.csv").string(), "final_rank");
  const auto pred_rows = read_label_file((result_dir / "final_labels.csv").string(), "predicted_rank");
  const auto split_rows = read_label_file((result_dir / "split.csv").string(), "set");
  if (final_rows.size() != data.size() || split_rows.size() != data.size()) {
    throw InputError("result directory files disagree on the record count");
  }
  std::vector<int> final_labels, predictions, rule_labels, train_index, test_index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& id = data.records[i].id;
    if (final_rows[i].first != id || split_rows[i].first != id) throw InputError("result files are not aligned by id");
    final_labels.push_back(parse_rank(final_rows[i].second, k, "final_labels.csv"));
    predictions.push_back(parse_rank(pred_rows[i].second, k, "final_labels.csv"));
    const auto it = hrg_by_id.find(id);
    if (it == hrg_by_id.end()) throw InputError("HRG labels have no row for id " + id);
    rule_labels.push_back(parse_rank(it->second, k, "HRG labels, id " + id));
    (split_rows[i].second == "train" ? train_index : test_index).push_back(static_cast<int>(i));
  }

  const auto ev = pipeline::evaluate_run(data, final_labels, predictions, train_index, test_index, rule_labels, k,
                                         tree.params.loss);
  std::map<std::string, std::string> out;
  json comparison = pipeline::to_json(ev);
  comparison["verdict"] = {{"train_learned_lower_everywhere", ev.train_predicted.learned_lower_everywhere()},
                           {"test_learned_lower_everywhere", ev.test_predicted.learned_lower_everywhere()}};
  out["comparison.json"] = dump(comparison);

  {
    std::ostringstream os;
    csv::write_row(os, {"set", "factor", "grouping", "group", "n", "variance", "too_small"});
    const std::pair<const char*, const evaluate::GroupingComparison*> sets[] = {
        {"train", &ev.train_predicted}, {"test", &ev.test_predicted}};
    for (const auto& [set, cmp] : sets) {
      for (const auto& f : cmp->factors) {
        for (const auto& [grouping, rep] : {std::pair{"learned", &f.learned}, std::pair{"rules", &f.rules}}) {
          for (const auto& g : rep->groups) {
            csv::write_row(os, {set, f.factor, grouping, std::to_string(g.group), std::to_string(g.n),
                                csv::format_double(g.variance), g.too_small ? "yes" : "no"});
          }
        }
      }
    }
    out["variance.csv"] = os.str();
  }
  {
    std::ostringstream os;
    csv::Row header = {"true\\predicted"};
    for (int c = 1; c <= k; ++c) header.push_back(std::to_string(c));
    csv::write_row(os, header);
    for (int r = 0; r < k; ++r) {
      csv::Row row = {std::to_string(r + 1)};
      for (int c = 0; c < k; ++c) row.push_back(std::to_string(ev.test_confusion.matrix(r, c)));
      csv::write_row(os, row);
    }
    out["confusion.csv"] = os.str();
  }
  {
    std::ostringstream os;
    csv::write_row(os, {"factor", "grouping", "group", "n", "min", "q1", "median", "q3", "max"});
    for (std::size_t f = 0; f < 3; ++f) {
      for (const auto& [grouping, rep] :
           {std::pair{"learned", &ev.learned_boxplots[f]}, std::pair{"rules", &ev.rules_boxplots[f]}}) {
        for (const auto& g : rep->groups) {
          csv::write_row(os, {pipeline::kFactors[f], grouping, std::to_string(g.group), std::to_string(g.n),
                              csv::format_double(g.min), csv::format_double(g.q1), csv::format_double(g.median),
                              csv::format_double(g.q3), csv::format_double(g.max)});
        }
      }
    }
    out["boxplots.csv"] = os.str();
  }
  out["rules.txt"] = tree::rules_to_text(tree::extract_rules(tree), tree.schema);

  if (want_svg) {
    std::vector<std::string> cats(pipeline::kFactors.begin(), pipeline::kFactors.end());
    for (const auto& [set, cmp] : {std::pair{"train", &ev.train_predicted}, std::pair{"test", &ev.test_predicted}}) {
      svg::BarSeries learned{"learned groups", {}, "#3b75af"}, rules{"rule groups", {}, "#ef8636"};
      for (const auto& f : cmp->factors) {
        learned.values.push_back(f.learned.mean);
        rules.values.push_back(f.rules.mean);
      }
      out[std::string("variance_") + set + ".svg"] =
          svg::bar_chart(std::string("Mean intra-group variance (log1p), ") + set, cats, {learned, rules});
    }
    for (std::size_t f = 0; f < 3; ++f) {
      out["boxplot_" + pipeline::kFactors[f] + ".svg"] =
          svg::boxplot_chart(pipeline::kFactors[f] + " by group (test)", ev.learned_boxplots[f], ev.rules_boxplots[f]);
    }
    const auto factor_rows = read_label_file((result_dir / "factor_labels.csv").string(), "mean_rank");
    std::vector<std::pair<double, double>> points;
    for (std::size_t i = 0; i < factor_rows.size() && i < final_labels.size(); ++i) {
      const auto mr = csv::parse_double(factor_rows[i].second);
      if (mr) points.emplace_back(final_labels[i], *mr);
    }
    out["rank_spread.svg"] = svg::scatter_chart("Mean factor rank by final class", "final class", "mean rank", points);
  }
  return out;
}

std::map<std::string, std::string> write_all(const fs::path& dir, const std::map<std::string, std::string>& files) {
  std::map<std::string, std::string> hashes;
  for (const auto& [name, content] : files) {
    write_atomic(dir / name, content);
    hashes[name] = sha256_hex(content);
  }
  return hashes;
}

std::map<std::string, std::string> hash_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path().string());
  }
  return out;
}

// Subcommands ---------------------------------------------------------------

void cmd_generate(const std::string& config_path, const std::string& out, const Options& opt) {
  const auto g = generate(cohort_config(read_json(config_path), opt));
  write_atomic(out, g.text);
  const auto name = fs::path(out).filename().string();
  write_atomic(out + ".manifest.json", dump(manifest("generate", config_path, g.config, {}, {{name, sha256_hex(g.text)}})));
  std::cerr << "generated " << g.cohort.size() << " records -> " << out << "\n";
}

void cmd_hrg(const std::string& cohort_path, const std::string& ruleset_path, const std::string& out) {
  const auto cohort = load_cohort(cohort_path);
  const auto rs = ruleset_path.empty() ? hrg::reference_ruleset() : load_ruleset(ruleset_path);
  const auto h = run_hrg(cohort, rs);
  write_atomic(out, h.labels_csv);
  write_atomic(out + ".histogram.csv", h.histogram_csv);
  const auto name = fs::path(out).filename().string();
  std::map<std::string, std::string> inputs = {{"cohort", sha256_file(cohort_path)}};
  if (!ruleset_path.empty()) inputs["ruleset"] = sha256_file(ruleset_path);
  write_atomic(out + ".manifest.json",
               dump(manifest("hrg", "", hrg::to_json(rs), inputs,
                             {{name, sha256_hex(h.labels_csv)}, {name + ".histogram.csv", sha256_hex(h.histogram_csv)}})));
}

void cmd_train(const std::string& cohort_path, const std::string& config_path, const std::string& out,
               const Options& opt) {
  const auto cfg = pipeline_config(read_json(config_path), opt);
  const auto cohort = load_cohort(cohort_path);
  const auto result = pipeline::run_pipeline(cohort, cfg, opt.threads);
  pipeline::write_result_dir(result, out);
  auto outputs = hash_dir(out);
  outputs.erase("manifest.json");
  write_atomic(fs::path(out) / "manifest.json",
               dump(manifest("train", config_path, pipeline::to_json(cfg), {{"cohort", sha256_file(cohort_path)}},
                             outputs)));
}

void cmd_evaluate(const std::string& result_dir, const std::string& hrg_path, const std::string& out, bool svg) {
  const auto hrg_rows = read_label_file(hrg_path, "hrg");
  const auto files = evaluate_outputs(result_dir, hrg_rows, svg);
  const auto outputs = write_all(out, files);
  write_atomic(fs::path(out) / "manifest.json",
               dump(manifest("evaluate", "", json::object(),
                             {{"hrg", sha256_file(hrg_path)},
                              {"provenance", sha256_file((fs::path(result_dir) / "provenance.json").string())}},
                             outputs)));
}

void cmd_all(const std::string& config_path, const std::string& out, bool svg, const Options& opt) {
  const auto cfg = read_json(config_path);
  if (!cfg.is_object() || !cfg.contains("cohort") || !cfg.contains("pipeline")) {
    throw InputError(config_path + ": expected an object with 'cohort' and 'pipeline'");
  }
  const auto cohort_cfg = cohort_config(cfg.at("cohort"), opt);
  const auto pipe_cfg = pipeline_config(cfg.at("pipeline"), opt);
  hrg::Ruleset rs = hrg::reference_ruleset();
  if (cfg.contains("ruleset")) {
    const auto& r = cfg.at("ruleset");
    if (r.is_string()) {
      fs::path p = r.get<std::string>();
      if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
      rs = load_ruleset(p.string());
    } else {
      try {
        rs = hrg::ruleset_from_json(r);
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
    }
  }

  const fs::path dir = out;
  const auto g = generate(cohort_cfg);
  write_atomic(dir / "cohort.csv", g.text);
  const auto h = run_hrg(g.cohort, rs);
  write_atomic(dir / "hrg_labels.csv", h.labels_csv);
  write_atomic(dir / "hrg_histogram.csv", h.histogram_csv);
  const auto result = pipeline::run_pipeline(g.cohort, pipe_cfg, opt.threads);
  pipeline::write_result_dir(result, (dir / "train").string());
  std::vector<std::pair<std::string, std::string>> hrg_rows;
  for (std::size_t i = 0; i < g.cohort.size(); ++i) {
    hrg_rows.emplace_back(g.cohort.records[i].id, h.labels[i] ? std::to_string(*h.labels[i]) : "U");
  }
  write_all(dir / "evaluate", evaluate_outputs(dir / "train", hrg_rows, svg));

  auto outputs = hash_dir(dir);
  outputs.erase("manifest.json");
  json effective = {{"cohort", g.config}, {"pipeline", pipeline::to_json(pipe_cfg)}, {"ruleset", hrg::to_json(rs)}};
  write_atomic(dir / "manifest.json", dump(manifest("all", config_path, effective, {}, outputs)));
}

int default_threads() {
  if (const char* env = std::getenv("CASEMIX_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size() && v >= 1) return v;
    std::cerr << "warning: ignoring CASEMIX_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-sensitive casemix grouping for burn-care episodes"};
  app.require_subcommand(1);
  Options opt;
  opt.threads = default_threads();
  app.add_option("--threads", opt.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--ephemeral", opt.ephemeral, "draw missing seeds at random instead of refusing to run");

  std::string config, out, cohort, ruleset, result, hrg_labels;
  bool svg = false;

  auto* gen = app.add_subcommand("generate", "write a synthetic cohort CSV");
  gen->add_option("--config", config, "cohort config JSON")->required();
  gen->add_option("--out", out, "output CSV")->required();

  auto* hrg = app.add_subcommand("hrg", "classify a cohort with an if-else ruleset");
  hrg->add_option("--cohort", cohort, "cohort CSV")->required();
  hrg->add_option("--ruleset", ruleset, "ruleset JSON (default: built-in reference rules)");
  hrg->add_option("--out", out, "labels CSV")->required();

  auto* train = app.add_subcommand("train", "run the grouping pipeline");
  train->add_option("--cohort", cohort, "cohort CSV")->required();
  train->add_option("--config", config, "pipeline config JSON")->required();
  train->add_option("--out", out, "result directory")->required();

  auto* eval = app.add_subcommand("evaluate", "compare learned groups with rule groups");
  eval->add_option("--result", result, "result directory from train")->required();
  eval->add_option("--hrg", hrg_labels, "labels CSV from hrg")->required();
  eval->add_option("--out", out, "report directory")->required();
  eval->add_flag("--svg", svg, "also write SVG figures");

  auto* all = app.add_subcommand("all", "generate, classify, train and evaluate in one go");
  all->add_option("--config", config, "JSON with 'cohort', 'pipeline' and optional 'ruleset'")->required();
  all->add_option("--out", out, "output directory")->required();
  all->add_flag("--svg", svg, "also write SVG figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (*gen) cmd_generate(config, out, opt);
    if (*hrg) cmd_hrg(cohort, ruleset, out);
    if (*train) cmd_train(cohort, config, out, opt);
    if (*eval) cmd_evaluate(result, hrg_labels, out, svg);
    if (*all) cmd_all(config, out, svg, opt);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pipeline::StageError& e) {
    std::cerr << "error: stage " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  std::cerr << "done in " << wall.count() << " s\n";
  return 0;
}
