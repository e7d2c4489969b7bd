#include "casemix/preprocess.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>

namespace casemix::preprocess {

std::size_t PreprocessReport::total_outliers() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : outliers_removed) n += count;
  return n;
}

Dataset impute_zeros(const Dataset& ds, std::size_t* cells_imputed) {
  Dataset out = ds;
  std::size_t count = 0;
  auto fill = [&count](auto& field, auto value) {
    if (!field) {
      field = value;
      ++count;
    }
  };
  for (auto& rec : out.records) {
    fill(rec.age_years, 0.0);
    fill(rec.los_days, 0.0);
    fill(rec.total_cost, 0.0);
    fill(rec.tbsa_pct, 0.0);
    fill(rec.theatre_visits, 0);
    for (auto& s : rec.burn_sites) {
      fill(s.area_pct, 0.0);
      fill(s.depth, BurnDepth::none);
    }
    for (const auto& spec : out.extra_schema) {
      if (rec.extra_features.contains(spec.name)) continue;
      if (spec.kind == FeatureKind::numeric) {
        rec.extra_features.emplace(spec.name, 0.0);
      } else {
        rec.extra_features.emplace(spec.name, std::string("none"));
      }
      ++count;
    }
  }
  if (cells_imputed) *cells_imputed = count;
  return out;
}

std::pair<Dataset, PreprocessReport> remove_outliers(const Dataset& ds) {
  PreprocessReport report;
  report.rows_in = ds.size();
  Dataset out;
  out.extra_schema = ds.extra_schema;
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    const bool long_stay = rec.los() > kMaxLosDays;
    const bool costly = rec.cost() > kMaxCost;
    if (long_stay && costly) {
      ++report.outliers_removed["los_and_cost"];
    } else if (long_stay) {
      ++report.outliers_removed["los"];
    } else if (costly) {
      ++report.outliers_removed["cost"];
    } else {
      out.records.push_back(rec);
      if (ds.labels) labels.push_back((*ds.labels)[i]);
    }
  }
  if (ds.labels) out.labels = std::move(labels);
  report.rows_out = out.size();
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PreprocessReport> remove_unclassifiable(const Dataset& ds) {
  PreprocessReport report;
  report.rows_in = ds.size();
  Dataset out;
  out.extra_schema = ds.extra_schema;
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (has_no_burn_recorded(ds.records[i])) {
      ++report.unclassifiable_removed;
      continue;
    }
    out.records.push_back(ds.records[i]);
    if (ds.labels) labels.push_back((*ds.labels)[i]);
  }
  if (ds.labels) out.labels = std::move(labels);
  report.rows_out = out.size();
  return {std::move(out), std::move(report)};
}

std::pair<Dataset, PreprocessReport> drop_irrelevant_variables(const Dataset& ds,
                                                               const PreprocessConfig& config) {
  PreprocessReport report;
  report.rows_in = report.rows_out = ds.size();
  const std::set<std::string> admin(config.administrative_fields.begin(),
                                    config.administrative_fields.end());

  using Column = std::vector<std::optional<FeatureValue>>;
  std::vector<Column> kept_columns;
  ExtraSchema kept;
  for (const auto& spec : ds.extra_schema) {
    Column col;
    col.reserve(ds.size());
    std::size_t missing = 0;
    for (const auto& rec : ds.records) {
      auto it = rec.extra_features.find(spec.name);
      if (it == rec.extra_features.end()) {
        col.emplace_back(std::nullopt);
        ++missing;
      } else {
        col.emplace_back(it->second);
      }
    }
    std::set<FeatureValue> distinct;
    for (const auto& c : col) {
      if (c) distinct.insert(*c);
    }
    const double missing_frac = ds.size() ? static_cast<double>(missing) / ds.size() : 0.0;

    std::string reason;
    if (admin.contains(spec.name)) {
      reason = "administrative";
    } else if (missing_frac > config.missing_threshold) {
      reason = "missing";
    } else if (distinct.size() <= 1) {
      reason = "constant";
    } else {
      for (std::size_t k = 0; k < kept_columns.size(); ++k) {
        if (kept_columns[k] == col) {
          reason = "duplicate of " + kept[k].name;
          break;
        }
      }
    }
    if (reason.empty()) {
      kept.push_back(spec);
      kept_columns.push_back(std::move(col));
    } else {
      report.variables_dropped.emplace(spec.name, reason);
    }
  }

  Dataset out = ds;
  out.extra_schema = kept;
  for (auto& rec : out.records) {
    std::erase_if(rec.extra_features,
                  [&](const auto& kv) { return report.variables_dropped.contains(kv.first); });
  }
  return {std::move(out), std::move(report)};
}

std::vector<double> log1p_factor(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!(v >= 0.0)) throw std::invalid_argument("log1p_factor: negative or NaN input");
    out.push_back(std::log1p(v));
  }
  return out;
}

std::pair<Dataset, PreprocessReport> run(const Dataset& ds, const PreprocessConfig& config) {
  PreprocessReport report;
  report.rows_in = ds.size();

  auto [dropped, drop_report] = drop_irrelevant_variables(ds, config);
  report.variables_dropped = std::move(drop_report.variables_dropped);

  Dataset imputed = impute_zeros(dropped, &report.cells_imputed);

  auto [classifiable, unc_report] = remove_unclassifiable(imputed);
  report.unclassifiable_removed = unc_report.unclassifiable_removed;

  auto [clean, out_report] = remove_outliers(classifiable);
  report.outliers_removed = std::move(out_report.outliers_removed);
  report.rows_out = clean.size();
  return {std::move(clean), std::move(report)};
}

void to_json(nlohmann::json& j, const PreprocessReport& r) {
  j = nlohmann::json{
      {"rows_in", r.rows_in},
      {"rows_out", r.rows_out},
      {"outliers_removed", r.outliers_removed},
      {"unclassifiable_removed", r.unclassifiable_removed},
      {"variables_dropped", r.variables_dropped},
      {"cells_imputed", r.cells_imputed},
  };
}

void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = nlohmann::json{{"missing_threshold", c.missing_threshold},
                     {"administrative_fields", c.administrative_fields}};
}

PreprocessConfig preprocess_config_from_json(const nlohmann::json& j) {
  PreprocessConfig c;
  if (j.contains("missing_threshold")) c.missing_threshold = j.at("missing_threshold").get<double>();
  if (j.contains("administrative_fields")) {
    c.administrative_fields = j.at("administrative_fields").get<std::vector<std::string>>();
  }
  if (!(c.missing_threshold >= 0.0 && c.missing_threshold <= 1.0)) {
    throw std::invalid_argument("missing_threshold must lie in [0, 1]");
  }
  return c;
}

}  // namespace casemix::preprocess
