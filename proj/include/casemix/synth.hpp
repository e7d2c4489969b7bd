#pragma once
// Deterministic synthetic burn cohort. The generator constants are
// fiction chosen so that LOS, cost and TBSA are right-skewed and
// positively correlated on the log scale; they do not reproduce any real
// registry's marginals.

#include "casemix/core.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>

namespace casemix::synth {

struct SeverityMixture {
  double minor = 0.6;
  double moderate = 0.3;
  double major = 0.1;
};

struct CohortConfig {
  std::int64_t n = 5000;
  std::uint64_t seed = 42;
  SeverityMixture mixture;
  double los_noise = 0.35;   // sd of log-LOS noise
  double cost_noise = 0.30;  // sd of log-cost noise
  double outlier_rate = 0.004;
  double unclassifiable_rate = 0.01;
  // Fraction of zero-valued cells written as empty, as registries do.
  double zero_missing_rate = 0.5;
};

void validate(const CohortConfig& config);

Dataset generate_cohort(const CohortConfig& config);

/// Blanks a `rate` fraction of the cells that hold zero (numeric 0 or depth
/// "none"), keyed by (seed, record, cell) so the choice is reproducible.
Dataset inject_missingness(const Dataset& ds, double rate, std::uint64_t seed);

/// The set of extra columns the generator emits, in column order.
ExtraSchema cohort_extra_schema();

void to_json(nlohmann::json& j, const CohortConfig& c);
/// Throws std::invalid_argument on missing or ill-typed fields. When
/// `require_seed` is set the "seed" field must be present.
CohortConfig cohort_config_from_json(const nlohmann::json& j, bool require_seed = true);

}  // namespace casemix::synth
