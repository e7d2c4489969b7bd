#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "casemix/hrg.hpp"
#include "casemix/synth.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <numeric>

using namespace casemix;
using namespace casemix::hrg;
using casemix::testing::make_record;

namespace {

Ruleset two_rules() {
  Ruleset rs;
  rs.version = "t";
  rs.k = 13;
  rs.rules = {{{{"tbsa_pct", Op::ge, 19.0, {}}}, 13}, {{}, 1}};
  return rs;
}

bool mentions(const RulesetValidation& v, const std::string& text) {
  return std::any_of(v.violations.begin(), v.violations.end(),
                     [&](const std::string& s) { return s.find(text) != std::string::npos; });
}

}  // namespace

TEST_CASE("first matching rule wins") {
  const auto rs = two_rules();
  CHECK(validate_ruleset(rs, {}).ok());
  CHECK(classify(make_record("a", 20, 1, 1), rs, {}) == 13);
  CHECK(classify(make_record("b", 5, 1, 1), rs, {}) == 1);
  CHECK(classify(make_record("c", 19, 1, 1), rs, {}) == 13);
}

TEST_CASE("records with nothing recorded at any site are unclassifiable under any ruleset") {
  auto r = make_record("z", 0, 4, 100);
  CHECK_FALSE(classify(r, two_rules(), {}).has_value());
  CHECK_FALSE(classify(r, reference_ruleset(), synth::cohort_extra_schema()).has_value());
  // tbsa says 20 but the sites are empty: still unclassifiable.
  r.tbsa_pct = 20;
  CHECK_FALSE(classify(r, two_rules(), {}).has_value());
}

TEST_CASE("a ruleset without catch-all or default is non-exhaustive") {
  auto rs = two_rules();
  rs.rules.pop_back();
  const auto v = validate_ruleset(rs, {});
  CHECK(mentions(v, "non-exhaustive"));
  CHECK_THROWS_AS(classify(make_record("a", 1, 1, 1), rs, {}), std::invalid_argument);
  rs.default_rank = 2;
  CHECK(validate_ruleset(rs, {}).ok());
  CHECK(classify(make_record("a", 1, 1, 1), rs, {}) == 2);
}

TEST_CASE("validation reports every violation") {
  Ruleset rs;
  rs.k = 3;
  rs.rules = {
      {{{"nonsense", Op::eq, 1.0, {}}}, 1},
      {{{"tbsa_pct", Op::eq, std::string("x"), {}}}, 2},
      {{{"sex", Op::lt, 1.0, {}}}, 2},
      {{}, 4},
      {{}, 1},
  };
  const auto v = validate_ruleset(rs, {{"sex", FeatureKind::categorical}});
  CHECK(mentions(v, "unknown feature nonsense"));
  CHECK(mentions(v, "constant type"));
  CHECK(mentions(v, "ordering comparison on categorical feature sex"));
  CHECK(mentions(v, "rank out of range"));
  CHECK(mentions(v, "unreachable"));
  CHECK(v.violations.size() >= 5);
}

TEST_CASE("reference ruleset validates against the generator schema and populates all ranks") {
  const auto rs = reference_ruleset();
  const auto v = validate_ruleset(rs, synth::cohort_extra_schema());
  CHECK(v.ok());
  CHECK(v.warnings.empty());
  const auto ds = synth::generate_cohort(synth::CohortConfig{});
  const auto a = classify_dataset(ds, rs);
  for (int r = 1; r <= 13; ++r) CHECK_MESSAGE(a.histogram.contains(r), "rank " << r);
  std::size_t total = a.unclassifiable;
  for (const auto& [r, n] : a.histogram) total += n;
  CHECK(total == ds.size());
}

TEST_CASE("classify_dataset conservation and determinism") {
  Dataset empty;
  const auto e = classify_dataset(empty, two_rules());
  CHECK(e.histogram.empty());
  CHECK(e.labels.empty());

  Dataset ds;
  for (int i = 0; i < 3; ++i) ds.records.push_back(make_record("same", 7, 2, 300));
  const auto a = classify_dataset(ds, two_rules());
  CHECK(a.labels[0] == a.labels[1]);
  CHECK(a.labels[1] == a.labels[2]);
  CHECK(a.histogram.at(1) == 3);
}

TEST_CASE("rule order matters for overlapping rules") {
  Ruleset a;
  a.k = 3;
  a.rules = {{{{"tbsa_pct", Op::ge, 10.0, {}}}, 3}, {{{"tbsa_pct", Op::ge, 5.0, {}}}, 2}, {{}, 1}};
  Ruleset b = a;
  std::swap(b.rules[0], b.rules[1]);
  const auto witness = make_record("w", 12, 1, 1);
  CHECK(classify(witness, a, {}) == 3);
  CHECK(classify(witness, b, {}) == 2);
}

TEST_CASE("every operator, including set membership and missing cells") {
  const ExtraSchema extras = {{"cause", FeatureKind::categorical}};
  auto r = make_record("a", 10, 3, 100, 2);
  r.extra_features["cause"] = std::string("scald");
  auto one = [&](Condition c) {
    Ruleset rs;
    rs.k = 2;
    rs.rules = {{{std::move(c)}, 2}, {{}, 1}};
    return *classify(r, rs, extras);
  };
  CHECK(one({"tbsa_pct", Op::lt, 10.0, {}}) == 1);
  CHECK(one({"tbsa_pct", Op::le, 10.0, {}}) == 2);
  CHECK(one({"tbsa_pct", Op::gt, 9.5, {}}) == 2);
  CHECK(one({"tbsa_pct", Op::ge, 10.5, {}}) == 1);
  CHECK(one({"theatre_visits", Op::eq, 2.0, {}}) == 2);
  CHECK(one({"theatre_visits", Op::ne, 2.0, {}}) == 1);
  CHECK(one({"cause", Op::in, {}, {std::string("flame"), std::string("scald")}}) == 2);
  CHECK(one({"cause", Op::in, {}, {std::string("flame")}}) == 1);
  CHECK(one({"site_01_depth", Op::eq, std::string("partial"), {}}) == 2);
  r.los_days.reset();
  CHECK(one({"los_days", Op::ge, 0.0, {}}) == 1);
}

TEST_CASE("JSON round-trip is exact") {
  auto rs = reference_ruleset();
  rs.rules.insert(rs.rules.begin(), Rule{{{"cause", Op::in, {}, {std::string("chemical"), std::string("electrical")}},
                                          {"tbsa_pct", Op::lt, 2.5, {}}},
                                         7});
  rs.default_rank = 1;
  const auto j = to_json(rs);
  const auto back = ruleset_from_json(j);
  CHECK(back == rs);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(j.at("rules")[1].at("if")[1].at("value").is_number_integer());
}

TEST_CASE("malformed ruleset documents name the offending path") {
  auto expect_error = [](const nlohmann::json& j, const std::string& fragment) {
    try {
      ruleset_from_json(j);
      FAIL("expected an error mentioning " << fragment);
    } catch (const std::invalid_argument& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  expect_error(nlohmann::json::array(), "object");
  expect_error({{"version", "v"}, {"k", 13}}, "rules");
  expect_error({{"version", "v"}, {"k", 13}, {"rules", {{{"if", {{{"feature", "x"}, {"op", "~"}, {"value", 1}}}}, {"then", 1}}}}},
               "rules[0]");
  expect_error({{"version", "v"}, {"k", "13"}, {"rules", nlohmann::json::array()}}, "k");
  CHECK_THROWS(read_ruleset_file("/nonexistent/rules.json"));
}
