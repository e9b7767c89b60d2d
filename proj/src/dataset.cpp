#include "fcp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fcp {

std::optional<Index> Dataset::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return static_cast<Index>(i);
  }
  return std::nullopt;
}

Index Dataset::require_feature(std::string_view name) const {
  if (auto i = feature_index(name)) return *i;
  throw ValidationError("dataset has no feature named \"" + std::string(name) + "\"");
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) names.push_back(f.name);
  return names;
}

std::vector<Index> Dataset::class_counts() const {
  std::vector<Index> counts(class_names.size(), 0);
  for (Index y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.features = features;
  out.class_names = class_names;
  out.instances.resize(static_cast<Index>(rows.size()), n_features());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.instances.row(static_cast<Index>(r)) = instances.row(rows[r]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[r])]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<Index>(features.size()) != instances.cols()) {
    throw ValidationError("dataset: " + std::to_string(features.size()) +
                          " feature descriptors for " + std::to_string(instances.cols()) +
                          " columns");
  }
  if (static_cast<Index>(labels.size()) != instances.rows()) {
    throw ValidationError("dataset: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(instances.rows()) + " instances");
  }
  for (Index y : labels) {
    if (y < 0 || y >= n_classes()) {
      throw ValidationError("dataset: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(n_classes()) + ")");
    }
  }
  for (const auto& f : features) {
    if (f.kind == FeatureKind::nominal) {
      std::set<std::string> unique(f.categories.begin(), f.categories.end());
      if (f.categories.empty() || unique.size() != f.categories.size()) {
        throw ValidationError("dataset: nominal feature \"" + f.name +
                              "\" needs non-empty, unique categories");
      }
    }
  }
  require_finite(instances, "dataset");
}

// ---------------------------------------------------------------------------
// Schema

namespace {

FeatureMeta parse_feature(const nlohmann::json& doc, std::size_t i) {
  const std::string where = "schema: features[" + std::to_string(i) + "]";
  if (!doc.is_object()) throw ParseError(where + ": expected an object");
  FeatureMeta meta;
  auto name = doc.find("name");
  if (name == doc.end() || !name->is_string()) throw ParseError(where + ": missing \"name\"");
  meta.name = name->get<std::string>();
  const std::string kind = doc.value("kind", std::string("numeric"));
  if (kind == "numeric") {
    meta.kind = FeatureKind::numeric;
  } else if (kind == "nominal") {
    meta.kind = FeatureKind::nominal;
    auto cats = doc.find("categories");
    if (cats == doc.end() || !cats->is_array()) {
      throw ParseError(where + ": nominal feature needs \"categories\"");
    }
    for (const auto& c : *cats) {
      if (!c.is_string()) throw ParseError(where + ": categories must be strings");
      meta.categories.push_back(c.get<std::string>());
    }
    std::set<std::string> unique(meta.categories.begin(), meta.categories.end());
    if (meta.categories.empty() || unique.size() != meta.categories.size()) {
      throw ParseError(where + ": categories must be non-empty and unique");
    }
  } else {
    throw ParseError(where + ": unknown kind \"" + kind + "\"");
  }
  meta.is_protected = doc.value("protected", false);
  return meta;
}

}  // namespace

CsvSchema load_schema(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("schema: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("schema: expected an object");
  CsvSchema schema;
  auto features = doc.find("features");
  if (features == doc.end() || !features->is_array() || features->empty()) {
    throw ParseError("schema: \"features\" must be a non-empty array");
  }
  for (std::size_t i = 0; i < features->size(); ++i) {
    schema.features.push_back(parse_feature((*features)[i], i));
  }
  auto label = doc.find("label");
  if (label == doc.end() || !label->is_string()) throw ParseError("schema: missing \"label\"");
  schema.label = label->get<std::string>();
  if (auto classes = doc.find("classes"); classes != doc.end()) {
    for (const auto& c : *classes) schema.classes.push_back(c.get<std::string>());
  }
  return schema;
}

CsvSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("schema: cannot open " + path.string());
  return load_schema(in);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

bool is_missing(const std::string& v) { return v.empty() || v == "?" || v == "NA"; }

double parse_number(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(where + ": \"" + text + "\" is not a finite number");
  }
  return value;
}

Index encode_category(const FeatureMeta& meta, const std::string& value,
                      const std::string& where) {
  auto it = std::find(meta.categories.begin(), meta.categories.end(), value);
  if (it == meta.categories.end()) {
    throw ParseError(where + ": unknown category \"" + value + "\" for feature \"" +
                     meta.name + "\"");
  }
  return static_cast<Index>(it - meta.categories.begin());
}

std::string location(std::size_t row, std::size_t col, const std::string& column) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col + 1) + " (" +
         column + ")";
}

}  // namespace

Dataset load_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty input, header row expected");
  const auto header = split_csv_line(line);
  if (header.size() != schema.features.size() + 1) {
    throw ParseError("csv: header has " + std::to_string(header.size()) +
                     " columns, schema describes " +
                     std::to_string(schema.features.size() + 1));
  }

  // Map every schema feature (and the label) to its header column.
  std::vector<std::size_t> column_of(schema.features.size());
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    auto it = std::find(header.begin(), header.end(), schema.features[f].name);
    if (it == header.end()) {
      throw ParseError("csv: header lacks schema feature \"" + schema.features[f].name + "\"");
    }
    column_of[f] = static_cast<std::size_t>(it - header.begin());
  }
  auto label_it = std::find(header.begin(), header.end(), schema.label);
  if (label_it == header.end()) {
    throw ParseError("csv: header lacks label column \"" + schema.label + "\"");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("csv: row " + std::to_string(row_number) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    std::vector<double> values(schema.features.size());
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const std::size_t col = column_of[f];
      const auto& text = fields[col];
      const auto where = "csv: " + location(row_number, col, header[col]);
      if (is_missing(text)) throw ParseError(where + ": missing value");
      const auto& meta = schema.features[f];
      values[f] = meta.kind == FeatureKind::nominal
                      ? static_cast<double>(encode_category(meta, text, where))
                      : parse_number(text, where);
    }
    if (is_missing(fields[label_col])) {
      throw ParseError("csv: " + location(row_number, label_col, schema.label) +
                       ": missing label");
    }
    raw_labels.push_back(fields[label_col]);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("csv: no data rows");

  Dataset data;
  data.features = schema.features;
  data.class_names = schema.classes;
  if (data.class_names.empty()) {
    std::set<std::string> unique(raw_labels.begin(), raw_labels.end());
    data.class_names.assign(unique.begin(), unique.end());
  }
  data.instances.resize(static_cast<Index>(rows.size()),
                        static_cast<Index>(schema.features.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t f = 0; f < rows[r].size(); ++f) {
      data.instances(static_cast<Index>(r), static_cast<Index>(f)) = rows[r][f];
    }
    auto it = std::find(data.class_names.begin(), data.class_names.end(), raw_labels[r]);
    if (it == data.class_names.end()) {
      throw ParseError("csv: row " + std::to_string(r + 2) + ": label \"" + raw_labels[r] +
                       "\" not among schema classes");
    }
    data.labels.push_back(static_cast<Index>(it - data.class_names.begin()));
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open " + path.string());
  return load_csv(in, schema);
}

// ---------------------------------------------------------------------------
// German Credit

namespace {

FeatureMeta nominal(std::string name, std::string prefix, int first, int last,
                    bool is_protected = false) {
  FeatureMeta meta{std::move(name), FeatureKind::nominal, {}, is_protected};
  for (int code = first; code <= last; ++code) {
    meta.categories.push_back(prefix + std::to_string(code));
  }
  return meta;
}

FeatureMeta numeric(std::string name, bool is_protected = false) {
  return FeatureMeta{std::move(name), FeatureKind::numeric, {}, is_protected};
}

}  // namespace

std::vector<FeatureMeta> uci_german_schema() {
  return {
      nominal("checking_account_status", "A", 11, 14),
      numeric("months"),
      nominal("credit_history", "A", 30, 34),
      nominal("purpose", "A4", 0, 10),  // A40..A49, A410
      numeric("credit_amount"),
      nominal("savings_account_status", "A", 61, 65),
      nominal("employment_since", "A", 71, 75),
      numeric("installment_rate"),
      nominal("personal_status_sex", "A", 91, 95, true),
      nominal("other_debtors", "A", 101, 103),
      numeric("residence_since"),
      nominal("property", "A", 121, 124),
      numeric("age", true),
      nominal("other_installments", "A", 141, 143),
      nominal("housing", "A", 151, 153),
      numeric("existing_credits"),
      nominal("job", "A", 171, 174),
      numeric("people_liable"),
      nominal("telephone", "A", 191, 192),
      nominal("foreign_worker", "A", 201, 202),
  };
}

Dataset load_uci_german(std::istream& in) {
  const auto schema = uci_german_schema();
  const std::size_t n = schema.size();
  std::vector<std::vector<double>> rows;
  std::vector<Index> labels;
  std::string line;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.size() != n + 1) {
      throw ParseError("german: row " + std::to_string(row_number) + " has " +
                       std::to_string(tokens.size()) + " fields, expected " +
                       std::to_string(n + 1));
    }
    std::vector<double> values(n);
    for (std::size_t f = 0; f < n; ++f) {
      const auto where = "german: " + location(row_number, f, schema[f].name);
      values[f] = schema[f].kind == FeatureKind::nominal
                      ? static_cast<double>(encode_category(schema[f], tokens[f], where))
                      : parse_number(tokens[f], where);
    }
    const auto& label = tokens[n];
    if (label != "1" && label != "2") {
      throw ParseError("german: " + location(row_number, n, "class") + ": label \"" + label +
                       "\" is neither 1 (good) nor 2 (bad)");
    }
    labels.push_back(label == "1" ? 0 : 1);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("german: no data rows");
  Dataset data;
  data.features = schema;
  data.class_names = {"good", "bad"};
  data.labels = std::move(labels);
  data.instances.resize(static_cast<Index>(rows.size()), static_cast<Index>(n));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t f = 0; f < n; ++f) {
      data.instances(static_cast<Index>(r), static_cast<Index>(f)) = rows[r][f];
    }
  }
  data.validate();
  return data;
}

Dataset load_uci_german(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("german: cannot open " + path.string());
  return load_uci_german(in);
}

Dataset recode_german_gender(const Dataset& data) {
  const auto column = data.feature_index("personal_status_sex");
  if (!column) throw ValidationError("recode_german_gender: no personal_status_sex feature");
  const FeatureMeta& source = data.features[static_cast<std::size_t>(*column)];
  static const std::map<std::string, double> gender_of{
      {"A91", 1.0}, {"A92", 0.0}, {"A93", 1.0}, {"A94", 1.0}, {"A95", 0.0}};

  Dataset out = data;
  for (Index r = 0; r < data.n_instances(); ++r) {
    const double code = data.instances(r, *column);
    const auto idx = static_cast<std::size_t>(code);
    if (code < 0 || static_cast<double>(idx) != code || idx >= source.categories.size()) {
      throw ValidationError("recode_german_gender: row " + std::to_string(r) +
                            " holds non-category value " + std::to_string(code));
    }
    auto it = gender_of.find(source.categories[idx]);
    if (it == gender_of.end()) {
      throw ValidationError("recode_german_gender: row " + std::to_string(r) +
                            ": unexpected code \"" + source.categories[idx] + "\"");
    }
    out.instances(r, *column) = it->second;
  }
  out.features[static_cast<std::size_t>(*column)] =
      FeatureMeta{"gender", FeatureKind::nominal, {"female", "male"}, true};
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

MinMaxScaler MinMaxScaler::fit(const Dataset& data) {
  if (data.n_instances() < 1) throw ValidationError("minmax: empty dataset");
  MinMaxScaler s;
  s.min = data.instances.colwise().minCoeff().transpose();
  s.max = data.instances.colwise().maxCoeff().transpose();
  for (Index c = 0; c < s.min.size(); ++c) {
    if (!(s.max(c) > s.min(c))) s.constant_columns.push_back(c);
  }
  return s;
}

bool MinMaxScaler::is_constant(Index column) const {
  return std::find(constant_columns.begin(), constant_columns.end(), column) !=
         constant_columns.end();
}

double MinMaxScaler::transform_value(Index column, double value) const {
  if (is_constant(column)) return 0.0;
  return (value - min(column)) / (max(column) - min(column));
}

double MinMaxScaler::inverse_value(Index column, double value) const {
  if (is_constant(column)) return min(column);
  return value * (max(column) - min(column)) + min(column);
}

Dataset MinMaxScaler::transform(const Dataset& data) const {
  if (data.n_features() != min.size()) {
    throw ShapeError("minmax: scaler fitted on " + std::to_string(min.size()) +
                     " columns, data has " + std::to_string(data.n_features()));
  }
  Dataset out = data;
  for (Index r = 0; r < out.n_instances(); ++r) {
    for (Index c = 0; c < out.n_features(); ++c) {
      out.instances(r, c) = transform_value(c, data.instances(r, c));
    }
  }
  return out;
}

Dataset MinMaxScaler::inverse_transform(const Dataset& data) const {
  if (data.n_features() != min.size()) {
    throw ShapeError("minmax: scaler fitted on " + std::to_string(min.size()) +
                     " columns, data has " + std::to_string(data.n_features()));
  }
  Dataset out = data;
  for (Index r = 0; r < out.n_instances(); ++r) {
    for (Index c = 0; c < out.n_features(); ++c) {
      out.instances(r, c) = inverse_value(c, data.instances(r, c));
    }
  }
  return out;
}

ScaledDataset minmax_scale(const Dataset& data) {
  auto scaler = MinMaxScaler::fit(data);
  auto scaled = scaler.transform(data);
  return {std::move(scaled), std::move(scaler)};
}

// ---------------------------------------------------------------------------
// Protected groups

Index ProtectedGroups::n_female() const {
  return static_cast<Index>(std::count(female.begin(), female.end(), true));
}

Index ProtectedGroups::n_young() const {
  return static_cast<Index>(std::count(young.begin(), young.end(), true));
}

ProtectedGroups protected_groups(const Dataset& data, const MinMaxScaler* scaler,
                                 std::string_view age_feature,
                                 std::string_view gender_feature) {
  const Index age = data.require_feature(age_feature);
  const Index gender = data.require_feature(gender_feature);
  const auto& gender_meta = data.features[static_cast<std::size_t>(gender)];
  auto female_it =
      std::find(gender_meta.categories.begin(), gender_meta.categories.end(), "female");
  if (female_it == gender_meta.categories.end()) {
    throw ValidationError("protected_groups: feature \"" + gender_meta.name +
                          "\" has no \"female\" category");
  }
  const auto female_code = static_cast<double>(female_it - gender_meta.categories.begin());

  auto original = [&](Index r, Index c) {
    const double v = data.instances(r, c);
    return scaler ? scaler->inverse_value(c, v) : v;
  };

  ProtectedGroups groups;
  for (Index r = 0; r < data.n_instances(); ++r) {
    groups.female.push_back(std::abs(original(r, gender) - female_code) < 1e-9);
    groups.young.push_back(original(r, age) < kYoungAgeThreshold);
  }
  return groups;
}

}  // namespace fcp
