#pragma once
// Cohort cleaning. The fixed order is
//   drop_irrelevant_variables -> impute_zeros -> remove_unclassifiable -> remove_outliers
// Missingness is assessed before imputation so that imputation cannot hide it.

#include "casemix/core.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace casemix::preprocess {

inline constexpr double kMaxLosDays = 360.0;
inline constexpr double kMaxCost = 1'000'000.0;

struct PreprocessConfig {
  double missing_threshold = 0.6;
  std::vector<std::string> administrative_fields = {"admin_site_code", "free_text_notes"};
};

struct PreprocessReport {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::map<std::string, std::size_t> outliers_removed;  // reason -> count
  std::size_t unclassifiable_removed = 0;
  std::map<std::string, std::string> variables_dropped;  // column -> reason
  std::size_t cells_imputed = 0;

  std::size_t total_outliers() const;
  bool reconciles() const { return rows_out + total_outliers() + unclassifiable_removed == rows_in; }
  bool operator==(const PreprocessReport&) const = default;
};

/// Missing numeric cells become 0, missing depths become none. Categorical
/// extras that are missing take the level "none".
Dataset impute_zeros(const Dataset& ds, std::size_t* cells_imputed = nullptr);

/// Drops records with LOS > 360 or cost > 1,000,000 (boundaries kept).
std::pair<Dataset, PreprocessReport> remove_outliers(const Dataset& ds);

/// Drops records with no area and no depth at any of the 27 sites.
std::pair<Dataset, PreprocessReport> remove_unclassifiable(const Dataset& ds);

/// Drops extra columns that are administrative, mostly missing, constant or
/// exact duplicates of an earlier column.
std::pair<Dataset, PreprocessReport> drop_irrelevant_variables(const Dataset& ds,
                                                               const PreprocessConfig& config = {});

/// Elementwise log(1 + x); throws std::invalid_argument on negative input.
std::vector<double> log1p_factor(std::span<const double> values);

/// The whole cleaning sequence with a merged report.
std::pair<Dataset, PreprocessReport> run(const Dataset& ds, const PreprocessConfig& config = {});

void to_json(nlohmann::json& j, const PreprocessReport& r);
void to_json(nlohmann::json& j, const PreprocessConfig& c);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

}  // namespace casemix::preprocess
