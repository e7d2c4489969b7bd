#pragma once
// Ordered if-else grouper in the style of casemix HRG rules: the first
// rule whose conditions all hold assigns its rank. Records with nothing
// recorded at any burn site are unclassifiable whatever the rules say.

#include "casemix/core.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace casemix::hrg {

enum class Op { lt, le, gt, ge, eq, ne, in };

struct Condition {
  std::string feature;
  Op op = Op::eq;
  FeatureValue value;             // all ops except `in`
  std::vector<FeatureValue> set;  // `in` only

  bool operator==(const Condition&) const = default;
};

struct Rule {
  std::vector<Condition> conditions;  // conjunction; empty == always true
  int target_rank = 1;

  bool operator==(const Rule&) const = default;
};

struct Ruleset {
  std::string version;
  int k = kDefaultClassCount;
  std::vector<Rule> rules;
  std::optional<int> default_rank;

  bool operator==(const Ruleset&) const = default;
};

struct RulesetValidation {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;  // e.g. ranks no rule targets
  bool ok() const { return violations.empty(); }
};

/// Unclassifiable == nullopt.
using Assignment = std::optional<int>;

struct DatasetAssignment {
  std::vector<Assignment> labels;
  std::map<int, std::size_t> histogram;  // rank -> count, observed ranks only
  std::size_t unclassifiable = 0;
};

/// Full check including feature references against the record schema.
RulesetValidation validate_ruleset(const Ruleset& rs, const ExtraSchema& extras);

/// Throws std::invalid_argument if the ruleset is structurally invalid or
/// references a feature the record schema does not have.
Assignment classify(const PatientRecord& record, const Ruleset& rs, const ExtraSchema& extras);

DatasetAssignment classify_dataset(const Dataset& ds, const Ruleset& rs);

/// 13-rank stand-in driven by TBSA bands, theatre visits, ventilation and
/// age. Not the NHS methodology.
Ruleset reference_ruleset();

std::string to_string(Op op);
std::optional<Op> parse_op(std::string_view s);

nlohmann::json to_json(const Ruleset& rs);
/// Throws std::invalid_argument naming the offending path on bad input.
Ruleset ruleset_from_json(const nlohmann::json& j);
Ruleset read_ruleset_file(const std::string& path);

}  // namespace casemix::hrg
