#include "fcp/network.hpp"

#include <cmath>
#include <string>

namespace fcp {

Activation Activation::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ValidationError("leaky_relu slope must lie in (0,1), got " +
                          std::to_string(slope));
  }
  return {ActivationType::leaky_relu, slope};
}

Activation Activation::elu(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ValidationError("elu alpha must be positive, got " +
                          std::to_string(alpha));
  }
  return {ActivationType::elu, alpha};
}

Activation Activation::from_name(std::string_view name, double param) {
  const bool has_param = !std::isnan(param);
  if (name == "identity") return identity();
  if (name == "sigmoid") return sigmoid();
  if (name == "tanh") return tanh();
  if (name == "relu") return relu();
  if (name == "softmax") return softmax();
  if (name == "leaky_relu") {
    return leaky_relu(has_param ? param : default_leaky_slope);
  }
  if (name == "elu") return elu(has_param ? param : default_elu_alpha);
  throw ValidationError("unknown activation \"" + std::string(name) + "\"");
}

std::string Activation::name() const {
  switch (type) {
    case ActivationType::identity: return "identity";
    case ActivationType::sigmoid: return "sigmoid";
    case ActivationType::tanh: return "tanh";
    case ActivationType::relu: return "relu";
    case ActivationType::leaky_relu: return "leaky_relu";
    case ActivationType::elu: return "elu";
    case ActivationType::softmax: return "softmax";
  }
  return "unknown";
}

namespace {

void validate_activation(const Activation& f, std::size_t l, bool is_output) {
  const auto where = "layer " + std::to_string(l);
  if (f.is_softmax() && !is_output) {
    throw ValidationError(where + ": softmax is only permitted on the output layer");
  }
  if (f.type == ActivationType::leaky_relu && !(f.param > 0.0 && f.param < 1.0)) {
    throw ValidationError(where + ": leaky_relu slope must lie in (0,1)");
  }
  if (f.type == ActivationType::elu && !(f.param > 0.0)) {
    throw ValidationError(where + ": elu alpha must be positive");
  }
}

}  // namespace

Network::Network(Index input_width, std::vector<Layer> layers)
    : input_width_(input_width), layers_(std::move(layers)) {
  if (input_width_ < 1) throw ShapeError("network: input width must be >= 1");
  if (layers_.empty()) throw ShapeError("network: at least one layer required");
  Index expected = input_width_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.fan_in() != expected) {
      if (l == 0) {
        throw ShapeError("network: layer 0 has " + std::to_string(layer.fan_in()) +
                         " weight rows but input width is " + std::to_string(expected));
      }
      throw ShapeError("network: layers " + std::to_string(l - 1) + " and " +
                       std::to_string(l) + " do not chain (" +
                       std::to_string(expected) + " outputs feed " +
                       std::to_string(layer.fan_in()) + " weight rows)");
    }
    if (layer.fan_out() < 1) {
      throw ShapeError("network: layer " + std::to_string(l) + " has no neurons");
    }
    if (layer.biases.size() != layer.fan_out()) {
      throw ShapeError("network: layer " + std::to_string(l) + " has " +
                       std::to_string(layer.biases.size()) + " biases for " +
                       std::to_string(layer.fan_out()) + " neurons");
    }
    require_finite(layer.weights, "network: layer " + std::to_string(l) + " weights");
    require_finite(layer.biases, "network: layer " + std::to_string(l) + " biases");
    validate_activation(layer.activation, l, l + 1 == layers_.size());
    expected = layer.fan_out();
  }
}

std::vector<Index> Network::widths() const {
  std::vector<Index> w{input_width_};
  for (const auto& layer : layers_) w.push_back(layer.fan_out());
  return w;
}

ActivationTrace forward(const Network& net, const VectorXr& x) {
  if (x.size() != net.input_width()) {
    throw ShapeError("forward: instance has " + std::to_string(x.size()) +
                     " features, network expects " + std::to_string(net.input_width()));
  }
  require_finite(x, "forward: instance");
  ActivationTrace trace;
  trace.activations.reserve(net.layers().size() + 1);
  trace.activations.push_back(x);
  for (const Layer& layer : net.layers()) {
    const VectorXr& a = trace.activations.back();
    VectorXr z(layer.fan_out());
    // Sorted reduction: permuting the inputs leaves every z bit-identical.
    for (Index i = 0; i < z.size(); ++i) {
      z(i) = canonical_sum(layer.weights.col(i).cwiseProduct(a)) + layer.biases(i);
    }
    trace.activations.push_back(activate(layer.activation, z));
  }
  return trace;
}

Index predict(const Network& net, const VectorXr& x) {
  return argmax_lowest(forward(net, x).output());
}

}  // namespace fcp
