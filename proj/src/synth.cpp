#include "casemix/synth.hpp"

#include "casemix/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace casemix::synth {

namespace {

enum Tag : std::uint64_t {
  kSeverity = 1,
  kTbsa,
  kSiteCount,
  kSitePick,
  kSiteWeights,
  kDepth,
  kTheatre,
  kLos,
  kCost,
  kAge,
  kCategorical,
  kOutlier,
  kUnclassifiable,
  kMissing,
};

enum class Severity { minor, moderate, major };

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double round_to(double v, double step) { return std::round(v / step) * step; }

template <std::size_t N>
std::size_t pick(rng::Stream& s, const std::array<double, N>& probs) {
  const double u = s.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return N - 1;
}

const std::array<std::string, 5> kCauses = {"scald", "flame", "contact", "chemical", "electrical"};

PatientRecord make_record(const CohortConfig& cfg, std::uint64_t i) {
  const auto seed = cfg.seed;
  PatientRecord rec;
  rec.id = "P" + std::to_string(i + 1);
  rec.burn_sites = empty_burn_sites();
  for (auto& s : rec.burn_sites) {
    s.area_pct = 0.0;
    s.depth = BurnDepth::none;
  }

  rng::Stream sev_s(seed, {i, kSeverity});
  const double u = sev_s.uniform();
  const Severity sev = u < cfg.mixture.minor                           ? Severity::minor
                       : u < cfg.mixture.minor + cfg.mixture.moderate ? Severity::moderate
                                                                      : Severity::major;

  // TBSA in integer tenths of a percent so that site areas sum exactly.
  rng::Stream tbsa_s(seed, {i, kTbsa});
  const double z_tbsa = tbsa_s.normal();
  double tbsa = 0.0;
  switch (sev) {
    case Severity::minor: tbsa = std::clamp(std::exp(std::log(1.0) + 0.7 * z_tbsa), 0.1, 5.0); break;
    case Severity::moderate: tbsa = std::clamp(std::exp(std::log(6.0) + 0.45 * z_tbsa), 2.0, 20.0); break;
    case Severity::major: tbsa = std::clamp(std::exp(std::log(22.0) + 0.5 * z_tbsa), 8.0, 95.0); break;
  }
  const int tenths = std::max(1, static_cast<int>(std::lround(tbsa * 10.0)));

  rng::Stream count_s(seed, {i, kSiteCount});
  int n_sites = 0;
  switch (sev) {
    case Severity::minor: n_sites = 1 + count_s.poisson(0.8); break;
    case Severity::moderate: n_sites = 2 + count_s.poisson(2.0); break;
    case Severity::major: n_sites = 4 + count_s.poisson(5.0); break;
  }
  n_sites = std::min({n_sites, kBurnSiteCount, tenths});

  std::array<int, kBurnSiteCount> order;
  std::iota(order.begin(), order.end(), 0);
  rng::Stream pick_s(seed, {i, kSitePick});
  for (int k = 0; k < n_sites; ++k) {
    const auto j = k + static_cast<int>(pick_s.below(kBurnSiteCount - k));
    std::swap(order[k], order[j]);
  }

  rng::Stream w_s(seed, {i, kSiteWeights});
  std::vector<double> weights(n_sites);
  for (auto& w : weights) w = w_s.uniform_open();
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> alloc(n_sites, 1);
  int remaining = tenths - n_sites;
  int assigned = 0;
  for (int k = 0; k < n_sites; ++k) {
    const int extra = static_cast<int>(std::floor(remaining * weights[k] / wsum));
    alloc[k] += extra;
    assigned += extra;
  }
  for (int k = 0; assigned < remaining; k = (k + 1) % n_sites, ++assigned) alloc[k] += 1;

  static constexpr std::array<std::array<double, 3>, 3> kDepthProbs = {{
      {0.60, 0.35, 0.05},
      {0.30, 0.50, 0.20},
      {0.15, 0.45, 0.40},
  }};
  rng::Stream depth_s(seed, {i, kDepth});
  int full_sites = 0;
  for (int k = 0; k < n_sites; ++k) {
    auto& site = rec.burn_sites[order[k]];
    site.area_pct = alloc[k] / 10.0;
    const auto d = pick(depth_s, kDepthProbs[static_cast<int>(sev)]);
    site.depth = static_cast<BurnDepth>(d + 1);
    if (site.depth == BurnDepth::full) ++full_sites;
  }
  rec.tbsa_pct = tenths / 10.0;
  tbsa = *rec.tbsa_pct;
  const double log_tbsa = std::log1p(tbsa);

  rng::Stream theatre_s(seed, {i, kTheatre});
  const int theatre = theatre_s.poisson(0.1 + 0.06 * tbsa + 0.5 * std::min(full_sites, 4));
  rec.theatre_visits = theatre;

  rng::Stream los_s(seed, {i, kLos});
  const double mu_los = 0.1 + 0.75 * log_tbsa + 0.22 * theatre + cfg.los_noise * los_s.normal();
  const double los = std::round(std::max(0.0, std::exp(mu_los) - 1.0));
  rec.los_days = los;

  rng::Stream cost_s(seed, {i, kCost});
  const double mu_cost = 6.3 + 0.55 * std::log1p(los) + 0.30 * log_tbsa + 0.35 * theatre +
                         cfg.cost_noise * cost_s.normal();
  rec.total_cost = round_to(std::exp(mu_cost), 0.01);

  rng::Stream age_s(seed, {i, kAge});
  rec.age_years = std::min(15.9, round_to(age_s.uniform() * 16.0, 0.1));

  rng::Stream cat_s(seed, {i, kCategorical});
  const std::string cause = kCauses[pick(cat_s, std::array<double, 5>{0.55, 0.2, 0.15, 0.05, 0.05})];
  const bool ventilated = cat_s.uniform() < logistic(-5.0 + 0.12 * tbsa);
  const bool inhalation = cat_s.uniform() < logistic(-4.5 + 0.08 * tbsa);
  rec.extra_features["sex"] = std::string(cat_s.uniform() < 0.5 ? "F" : "M");
  rec.extra_features["cause"] = cause;
  rec.extra_features["injury_mechanism"] = cause;
  rec.extra_features["ventilated"] = std::string(ventilated ? "yes" : "no");
  rec.extra_features["inhalation_injury"] = std::string(inhalation ? "yes" : "no");
  rec.extra_features["referral_delay_hours"] = round_to(-std::log(cat_s.uniform_open()) * 6.0, 0.5);
  rec.extra_features["admin_site_code"] = "S" + std::to_string(1 + cat_s.below(30));
  rec.extra_features["registry_flag"] = std::string("yes");
  if (cat_s.uniform() < 0.15) rec.extra_features["free_text_notes"] = std::string("see clinic letter");

  rng::Stream out_s(seed, {i, kOutlier});
  if (out_s.uniform() < cfg.outlier_rate) {
    if (out_s.uniform() < 0.5) {
      rec.los_days = 361.0 + static_cast<double>(out_s.below(300));
    } else {
      rec.total_cost = round_to(1'000'001.0 + out_s.uniform() * 2'000'000.0, 0.01);
    }
  }

  rng::Stream unc_s(seed, {i, kUnclassifiable});
  if (unc_s.uniform() < cfg.unclassifiable_rate) {
    for (auto& s : rec.burn_sites) {
      s.area_pct.reset();
      s.depth.reset();
    }
    rec.tbsa_pct.reset();
  }
  return rec;
}

}  // namespace

ExtraSchema cohort_extra_schema() {
  return {
      {"sex", FeatureKind::categorical},
      {"cause", FeatureKind::categorical},
      {"injury_mechanism", FeatureKind::categorical},
      {"ventilated", FeatureKind::categorical},
      {"inhalation_injury", FeatureKind::categorical},
      {"referral_delay_hours", FeatureKind::numeric},
      {"admin_site_code", FeatureKind::categorical},
      {"registry_flag", FeatureKind::categorical},
      {"free_text_notes", FeatureKind::categorical},
  };
}

void validate(const CohortConfig& c) {
  if (c.n < 1) throw std::invalid_argument("cohort size n must be >= 1");
  const auto& m = c.mixture;
  if (m.minor < 0 || m.moderate < 0 || m.major < 0 ||
      std::abs(m.minor + m.moderate + m.major - 1.0) > 1e-9) {
    throw std::invalid_argument("severity mixture weights must be non-negative and sum to 1");
  }
  if (!(c.los_noise > 0) || !(c.cost_noise > 0)) {
    throw std::invalid_argument("noise scales must be positive");
  }
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(c.outlier_rate) || !rate_ok(c.unclassifiable_rate) || !rate_ok(c.zero_missing_rate)) {
    throw std::invalid_argument("rates must lie in [0, 1]");
  }
}

Dataset generate_cohort(const CohortConfig& config) {
  validate(config);
  Dataset ds;
  ds.extra_schema = cohort_extra_schema();
  ds.records.resize(static_cast<std::size_t>(config.n));
  for (std::int64_t i = 0; i < config.n; ++i) {
    ds.records[i] = make_record(config, static_cast<std::uint64_t>(i));
  }
  if (config.zero_missing_rate > 0.0) {
    return inject_missingness(ds, config.zero_missing_rate, rng::combine(config.seed, kMissing));
  }
  return ds;
}

Dataset inject_missingness(const Dataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("missingness rate must lie in [0, 1]");
  Dataset out = ds;
  if (rate == 0.0) return out;
  for (std::size_t r = 0; r < out.records.size(); ++r) {
    auto& rec = out.records[r];
    std::uint64_t cell = 0;
    auto blank_if_zero = [&](auto& field) {
      const std::uint64_t id = cell++;
      if (!field || *field != 0) return;
      rng::Stream s(seed, {r, id});
      if (s.uniform() < rate) field.reset();
    };
    blank_if_zero(rec.age_years);
    blank_if_zero(rec.los_days);
    blank_if_zero(rec.total_cost);
    blank_if_zero(rec.tbsa_pct);
    blank_if_zero(rec.theatre_visits);
    for (auto& s : rec.burn_sites) blank_if_zero(s.area_pct);
    for (auto& s : rec.burn_sites) {
      const std::uint64_t id = cell++;
      if (!s.depth || *s.depth != BurnDepth::none) continue;
      rng::Stream st(seed, {r, id});
      if (st.uniform() < rate) s.depth.reset();
    }
    for (const auto& spec : out.extra_schema) {
      const std::uint64_t id = cell++;
      auto it = rec.extra_features.find(spec.name);
      if (it == rec.extra_features.end()) continue;
      const double* d = std::get_if<double>(&it->second);
      if (d == nullptr || *d != 0.0) continue;
      rng::Stream st(seed, {r, id});
      if (st.uniform() < rate) rec.extra_features.erase(it);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const CohortConfig& c) {
  j = nlohmann::json{
      {"n", c.n},
      {"seed", c.seed},
      {"mixture", {{"minor", c.mixture.minor}, {"moderate", c.mixture.moderate}, {"major", c.mixture.major}}},
      {"los_noise", c.los_noise},
      {"cost_noise", c.cost_noise},
      {"outlier_rate", c.outlier_rate},
      {"unclassifiable_rate", c.unclassifiable_rate},
      {"zero_missing_rate", c.zero_missing_rate},
  };
}

CohortConfig cohort_config_from_json(const nlohmann::json& j, bool require_seed) {
  if (!j.is_object()) throw std::invalid_argument("cohort config must be a JSON object");
  CohortConfig c;
  try {
    if (j.contains("n")) c.n = j.at("n").get<std::int64_t>();
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
    } else if (require_seed) {
      throw std::invalid_argument("cohort config has no explicit \"seed\"");
    }
    if (j.contains("mixture")) {
      const auto& m = j.at("mixture");
      c.mixture.minor = m.at("minor").get<double>();
      c.mixture.moderate = m.at("moderate").get<double>();
      c.mixture.major = m.at("major").get<double>();
    }
    if (j.contains("los_noise")) c.los_noise = j.at("los_noise").get<double>();
    if (j.contains("cost_noise")) c.cost_noise = j.at("cost_noise").get<double>();
    if (j.contains("outlier_rate")) c.outlier_rate = j.at("outlier_rate").get<double>();
    if (j.contains("unclassifiable_rate")) c.unclassifiable_rate = j.at("unclassifiable_rate").get<double>();
    if (j.contains("zero_missing_rate")) c.zero_missing_rate = j.at("zero_missing_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("cohort config: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace casemix::synth
