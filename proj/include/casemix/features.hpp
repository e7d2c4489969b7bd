#pragma once
// Dense feature view of a dataset. Numeric features are stored as-is;
// categorical features are stored as 0-based level codes. Missing cells
// are NaN. Unknown categorical levels (seen only at prediction time) are -1.

#include "casemix/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace casemix {

struct FeatureInfo {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> levels;  // categorical only, code = index

  bool operator==(const FeatureInfo&) const = default;
  int level_code(std::string_view level) const;
};

using FeatureSchema = std::vector<FeatureInfo>;

struct FeatureTable {
  Eigen::MatrixXd values;  // rows = records, cols = features
  FeatureSchema schema;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  int index_of(std::string_view name) const;  // -1 when absent
};

/// Names and kinds of every feature a record exposes: the core fields,
/// the 27 site areas and depths, then the dataset's extra columns.
std::vector<FeatureSpec> record_features(const ExtraSchema& extras);

/// Value of a named feature on a record, or nullopt when the cell is
/// missing. Throws std::invalid_argument for names that are not core or
/// site features and not present in `extras`.
std::optional<FeatureValue> feature_value(const PatientRecord& record, std::string_view name,
                                          const ExtraSchema& extras);

/// Full table; categorical levels are the sorted distinct observed values
/// (depth levels are always none, superficial, partial, full).
FeatureTable make_feature_table(const Dataset& ds);

/// Column subset in the order given.
FeatureTable select_features(const FeatureTable& table, const std::vector<std::string>& names);

/// Encodes one record against an existing schema.
Eigen::RowVectorXd encode_record(const PatientRecord& record, const FeatureSchema& schema,
                                 const ExtraSchema& extras);

}  // namespace casemix
