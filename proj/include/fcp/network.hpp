#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "fcp/activation.hpp"
#include "fcp/linalg.hpp"

namespace fcp {

/// Dense layer. `weights` is fan_in x fan_out: entry (j, i) connects source
/// neuron j to neuron i of this layer.
struct Layer {
  MatrixXr weights;
  VectorXr biases;
  Activation activation;

  Index fan_in() const { return weights.rows(); }
  Index fan_out() const { return weights.cols(); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// A fully-connected feed-forward classifier: H hidden layers and one output
/// layer. Immutable once constructed.
class Network {
 public:
  /// Throws ShapeError when layers do not chain, ValidationError for a
  /// softmax hidden layer or bad activation parameters, NumericError for
  /// non-finite parameters.
  Network(Index input_width, std::vector<Layer> layers);

  Index input_width() const { return input_width_; }
  Index output_width() const { return layers_.back().fan_out(); }
  Index hidden_layers() const { return static_cast<Index>(layers_.size()) - 1; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }

  /// Widths of layers 0..H+1, input first.
  std::vector<Index> widths() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  Index input_width_;
  std::vector<Layer> layers_;
};

/// Post-activation vectors A(0)..A(H+1); A(0) is the input instance.
struct ActivationTrace {
  std::vector<VectorXr> activations;

  const VectorXr& input() const { return activations.front(); }
  const VectorXr& output() const { return activations.back(); }
};

/// Runs the forward pass and records every layer's activations.
ActivationTrace forward(const Network& net, const VectorXr& x);

/// Index of the largest output activation; ties go to the lowest index.
Index predict(const Network& net, const VectorXr& x);

template <typename Derived>
Index argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

// Model file: {"input_width": N, "layers": [{"activation": .., "activation_params":
// {..}, "weights": [[..]], "biases": [..]}]}.
void save_model(const Network& net, std::ostream& out);
void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(std::istream& in);
Network load_model(const std::filesystem::path& path);

}  // namespace fcp
