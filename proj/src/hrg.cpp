#include "casemix/hrg.hpp"

#include "casemix/features.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace casemix::hrg {

namespace {

using nlohmann::json;

bool is_ordering(Op op) { return op == Op::lt || op == Op::le || op == Op::gt || op == Op::ge; }

// Checks that need no schema. Appends to `v`.
void structural_checks(const Ruleset& rs, std::vector<std::string>& v) {
  if (rs.k < 1) v.push_back("k must be >= 1");
  bool catch_all_seen = false;
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    const auto& rule = rs.rules[i];
    const std::string where = "rule " + std::to_string(i);
    if (catch_all_seen) v.push_back(where + ": unreachable after catch-all rule");
    if (rule.target_rank < 1 || rule.target_rank > rs.k) v.push_back(where + ": rank out of range");
    for (const auto& c : rule.conditions) {
      if (c.op == Op::in) {
        if (c.set.empty()) v.push_back(where + ": empty set for 'in' on " + c.feature);
        const bool mixed = std::any_of(c.set.begin(), c.set.end(), [&](const FeatureValue& x) {
          return x.index() != c.set.front().index();
        });
        if (mixed) v.push_back(where + ": mixed constant types in set for " + c.feature);
      } else if (is_ordering(c.op) && !std::holds_alternative<double>(c.value)) {
        v.push_back(where + ": ordering comparison on non-numeric constant for " + c.feature);
      }
    }
    if (rule.conditions.empty()) catch_all_seen = true;
  }
  if (rs.default_rank && (*rs.default_rank < 1 || *rs.default_rank > rs.k)) {
    v.push_back("default rank out of range");
  }
  if (!catch_all_seen && !rs.default_rank) v.push_back("non-exhaustive: no catch-all rule or default rank");
}

bool compare(const FeatureValue& x, Op op, const FeatureValue& c) {
  if (x.index() != c.index()) return false;
  switch (op) {
    case Op::eq: return x == c;
    case Op::ne: return x != c;
    default: break;
  }
  const double a = std::get<double>(x);
  const double b = std::get<double>(c);
  switch (op) {
    case Op::lt: return a < b;
    case Op::le: return a <= b;
    case Op::gt: return a > b;
    case Op::ge: return a >= b;
    default: return false;
  }
}

bool holds(const Condition& c, const PatientRecord& r, const ExtraSchema& extras) {
  const auto v = feature_value(r, c.feature, extras);
  if (!v) return false;
  if (c.op == Op::in) return std::find(c.set.begin(), c.set.end(), *v) != c.set.end();
  return compare(*v, c.op, c.value);
}

json value_to_json(const FeatureValue& v) {
  if (const double* d = std::get_if<double>(&v)) {
    if (std::floor(*d) == *d && std::abs(*d) < 9.0e15) return json(static_cast<std::int64_t>(*d));
    return json(*d);
  }
  return json(std::get<std::string>(v));
}

FeatureValue value_from_json(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw std::invalid_argument(path + ": constant must be a number or string");
}

}  // namespace

std::string to_string(Op op) {
  switch (op) {
    case Op::lt: return "<";
    case Op::le: return "<=";
    case Op::gt: return ">";
    case Op::ge: return ">=";
    case Op::eq: return "==";
    case Op::ne: return "!=";
    case Op::in: return "in";
  }
  return "==";
}

std::optional<Op> parse_op(std::string_view s) {
  for (Op op : {Op::lt, Op::le, Op::gt, Op::ge, Op::eq, Op::ne, Op::in}) {
    if (s == to_string(op)) return op;
  }
  return std::nullopt;
}

RulesetValidation validate_ruleset(const Ruleset& rs, const ExtraSchema& extras) {
  RulesetValidation out;
  structural_checks(rs, out.violations);
  const auto specs = record_features(extras);
  std::set<int> targeted;
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    const auto& rule = rs.rules[i];
    targeted.insert(rule.target_rank);
    for (const auto& c : rule.conditions) {
      const std::string where = "rule " + std::to_string(i) + ": ";
      auto it = std::find_if(specs.begin(), specs.end(),
                             [&](const FeatureSpec& s) { return s.name == c.feature; });
      if (it == specs.end()) {
        out.violations.push_back(where + "unknown feature " + c.feature);
        continue;
      }
      const bool numeric = it->kind == FeatureKind::numeric;
      if (!numeric && is_ordering(c.op)) {
        out.violations.push_back(where + "ordering comparison on categorical feature " + c.feature);
      }
      auto type_ok = [&](const FeatureValue& x) { return std::holds_alternative<double>(x) == numeric; };
      const bool consts_ok = c.op == Op::in ? std::all_of(c.set.begin(), c.set.end(), type_ok)
                                            : type_ok(c.value);
      if (!consts_ok) out.violations.push_back(where + "constant type does not match feature " + c.feature);
    }
  }
  if (rs.default_rank) targeted.insert(*rs.default_rank);
  for (int r = 1; r <= rs.k; ++r) {
    if (!targeted.contains(r)) out.warnings.push_back("rank " + std::to_string(r) + " not targeted");
  }
  return out;
}

Assignment classify(const PatientRecord& record, const Ruleset& rs, const ExtraSchema& extras) {
  std::vector<std::string> violations;
  structural_checks(rs, violations);
  if (!violations.empty()) throw std::invalid_argument("invalid ruleset: " + violations.front());
  if (has_no_burn_recorded(record)) return std::nullopt;
  for (const auto& rule : rs.rules) {
    const bool match = std::all_of(rule.conditions.begin(), rule.conditions.end(),
                                   [&](const Condition& c) { return holds(c, record, extras); });
    if (match) return rule.target_rank;
  }
  return rs.default_rank;
}

DatasetAssignment classify_dataset(const Dataset& ds, const Ruleset& rs) {
  DatasetAssignment out;
  out.labels.reserve(ds.size());
  for (const auto& rec : ds.records) {
    auto a = classify(rec, rs, ds.extra_schema);
    if (a) {
      ++out.histogram[*a];
    } else {
      ++out.unclassifiable;
    }
    out.labels.push_back(a);
  }
  return out;
}

Ruleset reference_ruleset() {
  auto num = [](std::string f, Op op, double v) { return Condition{std::move(f), op, v, {}}; };
  auto cat = [](std::string f, std::string v) { return Condition{std::move(f), Op::eq, std::move(v), {}}; };
  Ruleset rs;
  rs.version = "reference-stand-in-1";
  rs.k = 13;
  rs.rules = {
      {{cat("ventilated", "yes"), num("tbsa_pct", Op::ge, 20)}, 13},
      {{cat("ventilated", "yes")}, 12},
      {{num("tbsa_pct", Op::ge, 30)}, 11},
      {{num("tbsa_pct", Op::ge, 15), num("theatre_visits", Op::ge, 1)}, 10},
      {{num("tbsa_pct", Op::ge, 15)}, 9},
      {{num("theatre_visits", Op::ge, 3)}, 8},
      {{num("tbsa_pct", Op::ge, 5), num("theatre_visits", Op::ge, 1)}, 7},
      {{num("tbsa_pct", Op::ge, 5)}, 6},
      {{num("theatre_visits", Op::ge, 1)}, 5},
      {{num("tbsa_pct", Op::ge, 2), num("age_years", Op::lt, 5)}, 4},
      {{num("tbsa_pct", Op::ge, 2)}, 3},
      {{num("age_years", Op::lt, 5)}, 2},
      {{}, 1},
  };
  return rs;
}

nlohmann::json to_json(const Ruleset& rs) {
  json rules = json::array();
  for (const auto& rule : rs.rules) {
    json conds = json::array();
    for (const auto& c : rule.conditions) {
      json jc = {{"feature", c.feature}, {"op", to_string(c.op)}};
      if (c.op == Op::in) {
        json arr = json::array();
        for (const auto& v : c.set) arr.push_back(value_to_json(v));
        jc["value"] = std::move(arr);
      } else {
        jc["value"] = value_to_json(c.value);
      }
      conds.push_back(std::move(jc));
    }
    rules.push_back({{"if", std::move(conds)}, {"then", rule.target_rank}});
  }
  json j = {{"version", rs.version}, {"k", rs.k}, {"rules", std::move(rules)}};
  if (rs.default_rank) j["default"] = *rs.default_rank;
  return j;
}

Ruleset ruleset_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("ruleset: document must be an object");
  auto need = [](const json& obj, const char* key, const std::string& path) -> const json& {
    if (!obj.contains(key)) throw std::invalid_argument(path + ": missing field '" + key + "'");
    return obj.at(key);
  };
  Ruleset rs;
  const auto& version = need(j, "version", "ruleset");
  if (!version.is_string()) throw std::invalid_argument("ruleset.version: must be a string");
  rs.version = version.get<std::string>();
  const auto& k = need(j, "k", "ruleset");
  if (!k.is_number_integer()) throw std::invalid_argument("ruleset.k: must be an integer");
  rs.k = k.get<int>();
  if (j.contains("default")) {
    if (!j.at("default").is_number_integer()) throw std::invalid_argument("ruleset.default: must be an integer");
    rs.default_rank = j.at("default").get<int>();
  }
  const auto& rules = need(j, "rules", "ruleset");
  if (!rules.is_array()) throw std::invalid_argument("ruleset.rules: must be an array");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string path = "ruleset.rules[" + std::to_string(i) + "]";
    const auto& jr = rules[i];
    if (!jr.is_object()) throw std::invalid_argument(path + ": must be an object");
    Rule rule;
    const auto& then = need(jr, "then", path);
    if (!then.is_number_integer()) throw std::invalid_argument(path + ".then: must be an integer");
    rule.target_rank = then.get<int>();
    const auto& conds = need(jr, "if", path);
    if (!conds.is_array()) throw std::invalid_argument(path + ".if: must be an array");
    for (std::size_t c = 0; c < conds.size(); ++c) {
      const std::string cpath = path + ".if[" + std::to_string(c) + "]";
      const auto& jc = conds[c];
      if (!jc.is_object()) throw std::invalid_argument(cpath + ": must be an object");
      Condition cond;
      const auto& feature = need(jc, "feature", cpath);
      if (!feature.is_string()) throw std::invalid_argument(cpath + ".feature: must be a string");
      cond.feature = feature.get<std::string>();
      const auto& op = need(jc, "op", cpath);
      auto parsed = op.is_string() ? parse_op(op.get<std::string>()) : std::nullopt;
      if (!parsed) throw std::invalid_argument(cpath + ".op: unknown operator");
      cond.op = *parsed;
      const auto& value = need(jc, "value", cpath);
      if (cond.op == Op::in) {
        if (!value.is_array()) throw std::invalid_argument(cpath + ".value: 'in' needs an array");
        for (const auto& v : value) cond.set.push_back(value_from_json(v, cpath + ".value"));
      } else {
        cond.value = value_from_json(value, cpath + ".value");
      }
      rule.conditions.push_back(std::move(cond));
    }
    rs.rules.push_back(std::move(rule));
  }
  return rs;
}

Ruleset read_ruleset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return ruleset_from_json(j);
}

}  // namespace casemix::hrg
