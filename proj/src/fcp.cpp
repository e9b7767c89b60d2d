#include "fcp/fcp.hpp"

#include <algorithm>

namespace fcp {

bool CompositionTrace::is_degenerate(Index layer, Index neuron) const {
  return std::find(degenerate_rows.begin(), degenerate_rows.end(),
                   NeuronRef{layer, neuron}) != degenerate_rows.end();
}

CompositionTrace explain(const Network& net, const ActivationTrace& activations) {
  const auto n_layers = net.layers().size();
  if (activations.activations.size() != n_layers + 1) {
    throw ShapeError("explain: activation trace has " +
                     std::to_string(activations.activations.size()) +
                     " layers, network has " + std::to_string(n_layers + 1));
  }
  CompositionTrace trace;
  trace.layers.reserve(n_layers + 1);
  trace.layers.push_back(init_compositions(net.input_width()));
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const auto raw = propagate_raw(trace.layers.back(), activations.activations[l - 1],
                                   net.layers()[l - 1].weights);
    auto normalized = normalize_rows(raw);
    for (Index i : normalized.degenerate_rows) {
      trace.degenerate_rows.push_back({static_cast<Index>(l), i});
    }
    trace.layers.push_back(std::move(normalized.values));
  }
  return trace;
}

CompositionTrace explain(const Network& net, const VectorXr& x) {
  return explain(net, forward(net, x));
}

nlohmann::json explanation_to_json(const CompositionTrace& trace, const VectorXr& x) {
  using nlohmann::json;
  json doc;
  doc["instance"] = std::vector<double>(x.data(), x.data() + x.size());
  json degenerate = json::array();
  for (const auto& ref : trace.degenerate_rows) degenerate.push_back({ref.layer, ref.neuron});
  doc["degenerate_rows"] = std::move(degenerate);
  json layers = json::array();
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const MatrixXr& m = trace.layers[l];
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    layers.push_back({{"layer", l}, {"compositions", std::move(rows)}});
  }
  doc["layers"] = std::move(layers);
  return doc;
}

}  // namespace fcp
