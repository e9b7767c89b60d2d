#include "fcp/attribution.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "fcp/csv_format.hpp"

namespace fcp {

std::string to_string(AttributionMethod method) {
  return method == AttributionMethod::fcp ? "FCP" : "LRP";
}

std::string to_string(AttributionScope scope) {
  return scope == AttributionScope::instance ? "instance" : "global";
}

std::vector<Index> FeatureRanking::order() const {
  std::vector<Index> out;
  out.reserve(entries.size());
  for (const auto& [feature, score] : entries) out.push_back(feature);
  return out;
}

Index FeatureRanking::rank_of(Index feature) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first == feature) return static_cast<Index>(i) + 1;
  }
  throw ValidationError("ranking: feature " + std::to_string(feature) + " not ranked");
}

FeatureRanking rank_features(const VectorXr& scores) {
  std::vector<Index> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return scores(a) > scores(b); });
  FeatureRanking ranking;
  for (Index i : idx) ranking.entries.emplace_back(i, scores(i));
  return ranking;
}

FeatureAttribution instance_importance(const CompositionTrace& trace, Index decision_neuron) {
  const MatrixXr& out = trace.output();
  if (decision_neuron < 0 || decision_neuron >= out.rows()) {
    throw ShapeError("instance_importance: output layer has no neuron " +
                     std::to_string(decision_neuron));
  }
  const auto layer = static_cast<Index>(trace.layers.size()) - 1;
  if (trace.is_degenerate(layer, decision_neuron) ||
      out.row(decision_neuron).cwiseAbs().sum() == 0.0) {
    throw DegenerateAttributionError("instance_importance: decision neuron " +
                                     std::to_string(decision_neuron) +
                                     " has an all-zero composition row");
  }
  return {out.row(decision_neuron).cwiseAbs().transpose(), AttributionMethod::fcp,
          AttributionScope::instance};
}

FeatureAttribution instance_importance(const CompositionTrace& trace, const Network& net,
                                       const VectorXr& x) {
  return instance_importance(trace, predict(net, x));
}

namespace {

void require_features(const Network& net, const Dataset& data, const char* op) {
  if (data.n_features() != net.input_width()) {
    throw ShapeError(std::string(op) + ": dataset has " + std::to_string(data.n_features()) +
                     " features, network expects " + std::to_string(net.input_width()));
  }
  if (data.n_instances() < 1) throw ValidationError(std::string(op) + ": empty dataset");
}

GlobalAttribution finish(VectorXr sum, Index used, Index degenerate, AttributionMethod method,
                         const char* op) {
  if (used == 0) {
    throw DegenerateAttributionError(std::string(op) + ": every instance is degenerate");
  }
  GlobalAttribution g;
  g.mean = {sum / static_cast<double>(used), method, AttributionScope::global};
  g.ranking = rank_features(g.mean.scores);
  g.instances_used = used;
  g.degenerate_instances = degenerate;
  return g;
}

}  // namespace

GlobalAttribution global_importance(const Network& net, const Dataset& data) {
  require_features(net, data, "global_importance");
  VectorXr sum = VectorXr::Zero(net.input_width());
  Index used = 0;
  Index degenerate = 0;
  for (Index r = 0; r < data.n_instances(); ++r) {
    const VectorXr x = data.instance(r);
    const auto activations = forward(net, x);
    const auto trace = explain(net, activations);
    try {
      sum += instance_importance(trace, argmax_lowest(activations.output())).scores;
      ++used;
    } catch (const DegenerateAttributionError&) {
      ++degenerate;
    }
  }
  return finish(std::move(sum), used, degenerate, AttributionMethod::fcp, "global_importance");
}

Index composition_class_vote(const CompositionTrace& trace, Index feature) {
  const MatrixXr& out = trace.output();
  if (feature < 0 || feature >= out.cols()) {
    throw ShapeError("composition_class_vote: no feature " + std::to_string(feature));
  }
  return argmax_lowest(out.col(feature));
}

double output_logit(const Network& net, const VectorXr& x, Index neuron) {
  const auto trace = forward(net, x);
  const Layer& last = net.layers().back();
  const VectorXr z = last.weights.transpose() * trace.activations[trace.activations.size() - 2] +
                     last.biases;
  return z(neuron);
}

FeatureAttribution lrp_epsilon(const Network& net, const VectorXr& x, double epsilon,
                               Index seed_neuron) {
  if (seed_neuron < 0 || seed_neuron >= net.output_width()) {
    throw ShapeError("lrp_epsilon: output layer has no neuron " + std::to_string(seed_neuron));
  }
  const auto trace = forward(net, x);
  const auto& layers = net.layers();

  VectorXr relevance = VectorXr::Zero(net.output_width());
  bool seeded = false;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const VectorXr& a = trace.activations[l];
    const Layer& layer = layers[l];
    const VectorXr z = layer.weights.transpose() * a + layer.biases;
    if (!seeded) {
      relevance(seed_neuron) = z(seed_neuron);
      seeded = true;
    }
    VectorXr ratio(z.size());
    for (Index k = 0; k < z.size(); ++k) {
      const double stabilizer = z(k) >= 0.0 ? epsilon : -epsilon;
      ratio(k) = relevance(k) / (z(k) + stabilizer);
    }
    // R_j = a_j * sum_k w_jk * R_k / (z_k + eps * sign(z_k))
    relevance = a.cwiseProduct(layer.weights * ratio);
  }
  return {relevance, AttributionMethod::lrp, AttributionScope::instance};
}

FeatureAttribution lrp_epsilon(const Network& net, const VectorXr& x, double epsilon) {
  return lrp_epsilon(net, x, epsilon, predict(net, x));
}

GlobalAttribution global_lrp(const Network& net, const Dataset& data, double epsilon) {
  require_features(net, data, "global_lrp");
  VectorXr sum = VectorXr::Zero(net.input_width());
  for (Index r = 0; r < data.n_instances(); ++r) {
    sum += lrp_epsilon(net, data.instance(r), epsilon).scores.cwiseAbs();
  }
  return finish(std::move(sum), data.n_instances(), 0, AttributionMethod::lrp, "global_lrp");
}

void write_attribution_csv(std::ostream& out, const FeatureAttribution& attribution,
                           const std::vector<std::string>& feature_names) {
  if (static_cast<Index>(feature_names.size()) != attribution.scores.size()) {
    throw ShapeError("write_attribution_csv: " + std::to_string(feature_names.size()) +
                     " names for " + std::to_string(attribution.scores.size()) + " scores");
  }
  out << "feature,name,score,method,scope\n";
  for (Index i = 0; i < attribution.scores.size(); ++i) {
    out << i << ',' << csv_field(feature_names[static_cast<std::size_t>(i)]) << ','
        << format_real(attribution.scores(i)) << ',' << to_string(attribution.method) << ','
        << to_string(attribution.scope) << '\n';
  }
}

}  // namespace fcp
