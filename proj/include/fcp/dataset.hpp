#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcp/linalg.hpp"

namespace fcp {

enum class FeatureKind { numeric, nominal };

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> categories;  // nominal only, in encoding order
  bool is_protected = false;

  friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

/// Encoded instances (rows) with integer class labels.
struct Dataset {
  MatrixXr instances;
  std::vector<Index> labels;
  std::vector<FeatureMeta> features;
  std::vector<std::string> class_names;

  Index n_instances() const { return instances.rows(); }
  Index n_features() const { return instances.cols(); }
  Index n_classes() const { return static_cast<Index>(class_names.size()); }
  VectorXr instance(Index i) const { return instances.row(i).transpose(); }
  std::optional<Index> feature_index(std::string_view name) const;
  Index require_feature(std::string_view name) const;
  std::vector<std::string> feature_names() const;
  std::vector<Index> class_counts() const;

  /// Rows in the given order.
  Dataset subset(const std::vector<Index>& rows) const;

  /// Throws ValidationError when metadata, labels and the matrix disagree.
  void validate() const;
};

/// Generic CSV description (JSON sidecar):
/// {"features":[{"name","kind","categories","protected"}], "label": "<col>",
///  "classes": [..optional..]}
struct CsvSchema {
  std::vector<FeatureMeta> features;
  std::string label;
  std::vector<std::string> classes;  // empty: sorted unique label values
};

CsvSchema load_schema(std::istream& in);
CsvSchema load_schema(const std::filesystem::path& path);

/// Comma-separated text with a header row. Nominal values are encoded by
/// their index in the schema's category list.
Dataset load_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// UCI German Credit native file (whitespace separated, 20 attributes plus
/// the 1=good/2=bad label). Labels become good=0, bad=1.
Dataset load_uci_german(std::istream& in);
Dataset load_uci_german(const std::filesystem::path& path);

/// The attribute list used by load_uci_german.
std::vector<FeatureMeta> uci_german_schema();

/// Replaces the "personal_status_sex" attribute (A91..A95) with a binary
/// protected "gender" feature: female=0 for A92/A95, male=1 for A91/A93/A94.
Dataset recode_german_gender(const Dataset& data);

/// Per-column min-max scaler.
struct MinMaxScaler {
  VectorXr min;
  VectorXr max;
  std::vector<Index> constant_columns;

  static MinMaxScaler fit(const Dataset& data);
  Dataset transform(const Dataset& data) const;
  Dataset inverse_transform(const Dataset& data) const;
  double transform_value(Index column, double value) const;
  double inverse_value(Index column, double value) const;
  bool is_constant(Index column) const;
};

struct ScaledDataset {
  Dataset data;
  MinMaxScaler scaler;
};

/// Fits a scaler on `data` and applies it. Constant columns map to 0 and
/// are reported in `scaler.constant_columns`.
ScaledDataset minmax_scale(const Dataset& data);

struct ProtectedGroups {
  std::vector<bool> female;
  std::vector<bool> young;
  Index n_female() const;
  Index n_young() const;
};

inline constexpr double kYoungAgeThreshold = 25.0;

/// Masks for the protected groups: gender == "female" and age strictly
/// below 25 years. When the data is scaled, pass its scaler so the age
/// threshold applies to the original values.
ProtectedGroups protected_groups(const Dataset& data, const MinMaxScaler* scaler = nullptr,
                                 std::string_view age_feature = "age",
                                 std::string_view gender_feature = "gender");

}  // namespace fcp
