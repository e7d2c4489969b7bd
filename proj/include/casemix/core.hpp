#pragma once
// Shared domain types for burn-casemix grouping: patient records, the
// ranked-class label, the misclassification cost matrix and the dataset
// container every other module works on.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace casemix {

inline constexpr int kBurnSiteCount = 27;
inline constexpr int kDefaultClassCount = 13;

enum class BurnDepth { none = 0, superficial = 1, partial = 2, full = 3 };

std::string_view to_string(BurnDepth d);
std::optional<BurnDepth> parse_depth(std::string_view s);

/// Anatomical names for the 27 recorded burn sites. Only used for display;
/// files address sites by their 1-based index.
const std::array<std::string, kBurnSiteCount>& default_site_names();

struct BurnSiteEntry {
  int site = 0;  // 0-based index into the 27 sites
  std::optional<double> area_pct;
  std::optional<BurnDepth> depth;

  bool operator==(const BurnSiteEntry&) const = default;
};

/// Numeric or categorical cell of an auxiliary feature column.
using FeatureValue = std::variant<double, std::string>;

struct PatientRecord {
  std::string id;
  std::optional<double> age_years;
  std::optional<double> los_days;
  std::optional<double> total_cost;
  std::optional<double> tbsa_pct;
  std::optional<int> theatre_visits;
  std::vector<BurnSiteEntry> burn_sites;
  // Absent key == missing cell.
  std::map<std::string, FeatureValue> extra_features;

  bool operator==(const PatientRecord&) const = default;

  double los() const { return los_days.value_or(0.0); }
  double cost() const { return total_cost.value_or(0.0); }
  double tbsa() const { return tbsa_pct.value_or(0.0); }
};

/// A rank in [1, K]; 1 is the least severe/costly class.
class RankedClassLabel {
 public:
  RankedClassLabel() = default;
  RankedClassLabel(int rank, int k);

  int rank() const { return rank_; }
  auto operator<=>(const RankedClassLabel&) const = default;

 private:
  int rank_ = 1;
};

/// K x K misclassification penalty; rows are the true class, columns the
/// predicted class. The diagonal is always zero.
class CostMatrix {
 public:
  explicit CostMatrix(Eigen::MatrixXd entries);

  int k() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  // 0-based class indices.
  double operator()(int truth, int predicted) const { return entries_(truth, predicted); }

  bool operator==(const CostMatrix& other) const { return entries_ == other.entries_; }

 private:
  Eigen::MatrixXd entries_;
};

/// entries(i, j) = |i - j|.
CostMatrix linear_cost_matrix(int k);
/// 0 on the diagonal, 1 elsewhere.
CostMatrix zero_one_cost_matrix(int k);

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  bool operator==(const FeatureSpec&) const = default;
};

/// Ordered description of the auxiliary (extra) columns of a dataset.
using ExtraSchema = std::vector<FeatureSpec>;

struct Dataset {
  std::vector<PatientRecord> records;
  ExtraSchema extra_schema;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return records.size(); }
  bool operator==(const Dataset&) const = default;
  const FeatureSpec* find_extra(std::string_view name) const;
};

struct ValidationOptions {
  // When set, the site areas must sum to tbsa_pct within this tolerance.
  std::optional<double> area_sum_tolerance;
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate_record(const PatientRecord& record, const ExtraSchema& schema,
                                 const ValidationOptions& options = {});

/// 27 empty sites, indices 0..26.
std::vector<BurnSiteEntry> empty_burn_sites();

bool has_no_burn_recorded(const PatientRecord& record);

}  // namespace casemix
