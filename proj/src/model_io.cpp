#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fcp/network.hpp"

namespace fcp {

using nlohmann::json;

namespace {

json activation_params(const Activation& f) {
  switch (f.type) {
    case ActivationType::leaky_relu: return json{{"slope", f.param}};
    case ActivationType::elu: return json{{"alpha", f.param}};
    default: return json::object();
  }
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError("model: " + where + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing \"") + key + "\"");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where, "non-finite number");
  return d;
}

Activation parse_activation(const json& layer, const std::string& where) {
  const json& name = member(layer, "activation", where);
  if (!name.is_string()) fail(where + ".activation", "expected a string");
  double param = NAN;
  if (auto it = layer.find("activation_params"); it != layer.end()) {
    if (!it->is_object()) fail(where + ".activation_params", "expected an object");
    for (const char* key : {"slope", "alpha"}) {
      if (auto p = it->find(key); p != it->end()) {
        param = number(*p, where + ".activation_params." + key);
      }
    }
  }
  try {
    return Activation::from_name(name.get<std::string>(), param);
  } catch (const ValidationError& e) {
    fail(where + ".activation", e.what());
  }
}

Layer parse_layer(const json& doc, std::size_t l) {
  const std::string where = "layers[" + std::to_string(l) + "]";
  Layer layer;
  layer.activation = parse_activation(doc, where);

  const json& weights = member(doc, "weights", where);
  if (!weights.is_array() || weights.empty()) fail(where + ".weights", "expected a non-empty array of rows");
  const auto rows = static_cast<Index>(weights.size());
  const auto& first = weights.front();
  if (!first.is_array() || first.empty()) fail(where + ".weights[0]", "expected a non-empty row");
  const auto cols = static_cast<Index>(first.size());
  layer.weights.resize(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto row_where = where + ".weights[" + std::to_string(i) + "]";
    const json& row = weights[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      fail(row_where, "expected " + std::to_string(cols) + " values");
    }
    for (Index j = 0; j < cols; ++j) {
      layer.weights(i, j) = number(row[static_cast<std::size_t>(j)],
                                   row_where + "[" + std::to_string(j) + "]");
    }
  }

  const json& biases = member(doc, "biases", where);
  if (!biases.is_array()) fail(where + ".biases", "expected an array");
  if (static_cast<Index>(biases.size()) != cols) {
    fail(where + ".biases", "expected " + std::to_string(cols) + " values, found " +
                                std::to_string(biases.size()));
  }
  layer.biases.resize(cols);
  for (Index j = 0; j < cols; ++j) {
    layer.biases(j) = number(biases[static_cast<std::size_t>(j)],
                             where + ".biases[" + std::to_string(j) + "]");
  }
  return layer;
}

}  // namespace

void save_model(const Network& net, std::ostream& out) {
  json doc;
  doc["input_width"] = net.input_width();
  json layers = json::array();
  for (const Layer& layer : net.layers()) {
    json weights = json::array();
    for (Index i = 0; i < layer.weights.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < layer.weights.cols(); ++j) row.push_back(layer.weights(i, j));
      weights.push_back(std::move(row));
    }
    json biases = json::array();
    for (Index j = 0; j < layer.biases.size(); ++j) biases.push_back(layer.biases(j));
    json entry;
    entry["activation"] = layer.activation.name();
    if (auto params = activation_params(layer.activation); !params.empty()) {
      entry["activation_params"] = std::move(params);
    }
    entry["weights"] = std::move(weights);
    entry["biases"] = std::move(biases);
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  // nlohmann serializes doubles with the shortest round-trip representation.
  out << doc.dump(1) << '\n';
}

void save_model(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("model: cannot open " + path.string() + " for writing");
  save_model(net, out);
  if (!out) throw Error("model: failed writing " + path.string());
}

Network load_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: malformed JSON: ") + e.what());
  }
  const json& width = member(doc, "input_width", "document");
  if (!width.is_number_integer() || width.get<long long>() < 1) {
    fail("input_width", "expected a positive integer");
  }
  const json& layers_doc = member(doc, "layers", "document");
  if (!layers_doc.is_array() || layers_doc.empty()) fail("layers", "expected a non-empty array");
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < layers_doc.size(); ++l) {
    layers.push_back(parse_layer(layers_doc[l], l));
  }
  try {
    return Network(width.get<Index>(), std::move(layers));
  } catch (const ShapeError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("model: cannot open " + path.string());
  return load_model(in);
}

}  // namespace fcp
