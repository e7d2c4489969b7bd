#include "casemix/core.hpp"

#include <cmath>
#include <stdexcept>

namespace casemix {

std::string_view to_string(BurnDepth d) {
  switch (d) {
    case BurnDepth::none: return "none";
    case BurnDepth::superficial: return "superficial";
    case BurnDepth::partial: return "partial";
    case BurnDepth::full: return "full";
  }
  return "none";
}

std::optional<BurnDepth> parse_depth(std::string_view s) {
  if (s == "none") return BurnDepth::none;
  if (s == "superficial") return BurnDepth::superficial;
  if (s == "partial") return BurnDepth::partial;
  if (s == "full") return BurnDepth::full;
  return std::nullopt;
}

const std::array<std::string, kBurnSiteCount>& default_site_names() {
  static const std::array<std::string, kBurnSiteCount> names = {
      "scalp",          "face",           "neck_anterior",   "neck_posterior",
      "chest",          "abdomen",        "upper_back",      "lower_back",
      "buttocks",       "genitalia",      "perineum",        "right_upper_arm",
      "left_upper_arm", "right_forearm",  "left_forearm",    "right_hand",
      "left_hand",      "right_thigh",    "left_thigh",      "right_lower_leg",
      "left_lower_leg", "right_foot",     "left_foot",       "right_axilla",
      "left_axilla",    "ears",           "airway_mucosa"};
  return names;
}

RankedClassLabel::RankedClassLabel(int rank, int k) : rank_(rank) {
  if (k < 1 || rank < 1 || rank > k) {
    throw std::invalid_argument("rank " + std::to_string(rank) + " outside [1, " +
                                std::to_string(k) + "]");
  }
}

CostMatrix::CostMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw std::invalid_argument("cost matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
      const double v = entries_(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("cost matrix entries must be finite and non-negative");
      }
      if (i == j && v != 0.0) {
        throw std::invalid_argument("cost matrix diagonal must be zero");
      }
    }
  }
}

CostMatrix linear_cost_matrix(int k) {
  if (k < 2) throw std::invalid_argument("linear_cost_matrix requires k >= 2");
  Eigen::MatrixXd m(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) m(i, j) = std::abs(i - j);
  }
  return CostMatrix(std::move(m));
}

CostMatrix zero_one_cost_matrix(int k) {
  if (k < 2) throw std::invalid_argument("zero_one_cost_matrix requires k >= 2");
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(k, k);
  m.diagonal().setZero();
  return CostMatrix(std::move(m));
}

const FeatureSpec* Dataset::find_extra(std::string_view name) const {
  for (const auto& spec : extra_schema) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

std::vector<BurnSiteEntry> empty_burn_sites() {
  std::vector<BurnSiteEntry> sites(kBurnSiteCount);
  for (int i = 0; i < kBurnSiteCount; ++i) sites[i].site = i;
  return sites;
}

bool has_no_burn_recorded(const PatientRecord& record) {
  for (const auto& s : record.burn_sites) {
    if (s.area_pct.value_or(0.0) != 0.0) return false;
    if (s.depth.value_or(BurnDepth::none) != BurnDepth::none) return false;
  }
  return true;
}

ValidationResult validate_record(const PatientRecord& record, const ExtraSchema& schema,
                                 const ValidationOptions& options) {
  ValidationResult out;
  auto& v = out.violations;
  if (record.burn_sites.size() != kBurnSiteCount) v.emplace_back("burn_sites count");
  if (record.tbsa_pct && !(*record.tbsa_pct >= 0.0 && *record.tbsa_pct <= 100.0)) {
    v.emplace_back("tbsa range");
  }
  if (record.los_days && !(*record.los_days >= 0.0)) v.emplace_back("los range");
  if (record.total_cost && !(*record.total_cost >= 0.0)) v.emplace_back("cost range");
  if (record.age_years && !(*record.age_years >= 0.0)) v.emplace_back("age range");
  if (record.theatre_visits && *record.theatre_visits < 0) v.emplace_back("theatre_visits range");

  double area_sum = 0.0;
  for (const auto& s : record.burn_sites) {
    if (s.area_pct) {
      if (!(*s.area_pct >= 0.0)) {
        v.emplace_back("site area range");
        break;
      }
      area_sum += *s.area_pct;
    }
  }
  if (options.area_sum_tolerance && record.burn_sites.size() == kBurnSiteCount &&
      std::abs(area_sum - record.tbsa()) > *options.area_sum_tolerance) {
    v.emplace_back("site area sum");
  }

  for (const auto& [name, value] : record.extra_features) {
    const FeatureSpec* spec = nullptr;
    for (const auto& s : schema) {
      if (s.name == name) spec = &s;
    }
    if (spec == nullptr) {
      v.emplace_back("unknown feature " + name);
      continue;
    }
    const bool numeric = std::holds_alternative<double>(value);
    if (numeric != (spec->kind == FeatureKind::numeric)) v.emplace_back("feature type " + name);
  }
  return out;
}

}  // namespace casemix
