#include "casemix/features.hpp"

#include "casemix/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace casemix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// site_NN_area / site_NN_depth -> (0-based site, is_depth)
std::optional<std::pair<int, bool>> parse_site_column(std::string_view name) {
  if (name.size() != 12 && name.size() != 13) return std::nullopt;
  if (name.substr(0, 5) != "site_") return std::nullopt;
  const auto tail = name.substr(7);
  const bool depth = tail == "_depth";
  if (!depth && tail != "_area") return std::nullopt;
  const char a = name[5], b = name[6];
  if (a < '0' || a > '9' || b < '0' || b > '9') return std::nullopt;
  const int site = (a - '0') * 10 + (b - '0') - 1;
  if (site < 0 || site >= kBurnSiteCount) return std::nullopt;
  return std::pair{site, depth};
}

const std::vector<std::string>& depth_levels() {
  static const std::vector<std::string> levels = {"none", "superficial", "partial", "full"};
  return levels;
}

std::optional<double> opt(const std::optional<int>& v) {
  if (!v) return std::nullopt;
  return static_cast<double>(*v);
}

}  // namespace

int FeatureInfo::level_code(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return static_cast<int>(i);
  }
  return -1;
}

int FeatureTable::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<FeatureSpec> record_features(const ExtraSchema& extras) {
  std::vector<FeatureSpec> out = {
      {"age_years", FeatureKind::numeric},  {"los_days", FeatureKind::numeric},
      {"total_cost", FeatureKind::numeric}, {"tbsa_pct", FeatureKind::numeric},
      {"theatre_visits", FeatureKind::numeric},
  };
  for (int s = 0; s < kBurnSiteCount; ++s) out.push_back({csv::site_area_column(s), FeatureKind::numeric});
  for (int s = 0; s < kBurnSiteCount; ++s) {
    out.push_back({csv::site_depth_column(s), FeatureKind::categorical});
  }
  out.insert(out.end(), extras.begin(), extras.end());
  return out;
}

std::optional<FeatureValue> feature_value(const PatientRecord& r, std::string_view name,
                                          const ExtraSchema& extras) {
  auto num = [](const std::optional<double>& v) -> std::optional<FeatureValue> {
    if (!v) return std::nullopt;
    return FeatureValue(*v);
  };
  if (name == "age_years") return num(r.age_years);
  if (name == "los_days") return num(r.los_days);
  if (name == "total_cost") return num(r.total_cost);
  if (name == "tbsa_pct") return num(r.tbsa_pct);
  if (name == "theatre_visits") return num(opt(r.theatre_visits));
  if (auto site = parse_site_column(name)) {
    if (r.burn_sites.size() != kBurnSiteCount) {
      throw std::invalid_argument("record " + r.id + " does not have 27 burn sites");
    }
    const auto& entry = r.burn_sites[site->first];
    if (site->second) {
      if (!entry.depth) return std::nullopt;
      return FeatureValue(std::string(to_string(*entry.depth)));
    }
    return num(entry.area_pct);
  }
  const bool known = std::any_of(extras.begin(), extras.end(),
                                 [&](const FeatureSpec& s) { return s.name == name; });
  if (!known) throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
  auto it = r.extra_features.find(std::string(name));
  if (it == r.extra_features.end()) return std::nullopt;
  return it->second;
}

FeatureTable make_feature_table(const Dataset& ds) {
  const auto specs = record_features(ds.extra_schema);
  FeatureTable t;
  t.schema.reserve(specs.size());
  for (const auto& spec : specs) {
    FeatureInfo info{spec.name, spec.kind, {}};
    if (spec.kind == FeatureKind::categorical) {
      if (parse_site_column(spec.name)) {
        info.levels = depth_levels();
      } else {
        std::set<std::string> levels;
        for (const auto& rec : ds.records) {
          auto it = rec.extra_features.find(spec.name);
          if (it != rec.extra_features.end()) {
            if (const auto* s = std::get_if<std::string>(&it->second)) levels.insert(*s);
          }
        }
        info.levels.assign(levels.begin(), levels.end());
      }
    }
    t.schema.push_back(std::move(info));
  }
  t.values.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(t.schema.size()));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    t.values.row(static_cast<Eigen::Index>(r)) = encode_record(ds.records[r], t.schema, ds.extra_schema);
  }
  return t;
}

FeatureTable select_features(const FeatureTable& table, const std::vector<std::string>& names) {
  FeatureTable out;
  out.values.resize(table.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const int idx = table.index_of(names[c]);
    if (idx < 0) throw std::invalid_argument("feature '" + names[c] + "' not in table");
    out.values.col(static_cast<Eigen::Index>(c)) = table.values.col(idx);
    out.schema.push_back(table.schema[idx]);
  }
  return out;
}

Eigen::RowVectorXd encode_record(const PatientRecord& record, const FeatureSchema& schema,
                                 const ExtraSchema& extras) {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(schema.size()));
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& info = schema[c];
    const auto v = feature_value(record, info.name, extras);
    double x = kNaN;
    if (v) {
      if (info.kind == FeatureKind::numeric) {
        const double* d = std::get_if<double>(&*v);
        if (!d) throw std::invalid_argument("feature '" + info.name + "' is not numeric");
        x = *d;
      } else {
        const auto* s = std::get_if<std::string>(&*v);
        if (!s) throw std::invalid_argument("feature '" + info.name + "' is not categorical");
        x = info.level_code(*s);
      }
    }
    row(static_cast<Eigen::Index>(c)) = x;
  }
  return row;
}

}  // namespace casemix
