#pragma once

#include <utility>
#include <vector>

#include <json.hpp>

#include "fcp/linalg.hpp"
#include "fcp/network.hpp"

namespace fcp {

/// Rows whose absolute mass falls below this are treated as carrying no
/// feature evidence.
inline constexpr double kDegenerateRowThreshold = 1e-12;

/// Position of a degenerate composition row: (layer, neuron).
struct NeuronRef {
  Index layer = 0;
  Index neuron = 0;
  friend bool operator==(const NeuronRef&, const NeuronRef&) = default;
};

/// Composition matrices for one instance. `layers[l]` has one row per neuron
/// of layer l and one column per input feature; `layers[0]` is the identity.
struct CompositionTrace {
  std::vector<MatrixXr> layers;
  std::vector<NeuronRef> degenerate_rows;

  const MatrixXr& output() const { return layers.back(); }
  Index n_features() const { return layers.front().cols(); }
  bool is_degenerate(Index layer, Index neuron) const;
};

template <typename Scalar>
struct NormalizedRows {
  Matrix<Scalar> values;
  std::vector<Index> degenerate_rows;
};

/// Compositions of the input layer: feature i fully describes input neuron i.
inline MatrixXr init_compositions(Index n_features) {
  if (n_features < 1) throw ShapeError("init_compositions: need at least one feature");
  return MatrixXr::Identity(n_features, n_features);
}

/// Raw (unnormalized) compositions of the next layer:
///   raw(i, k) = sum_j w(j, i) * theta(j, k) * |a(j)|
/// evaluated as ((|a| (x) theta)^T * W)^T. Biases never enter.
template <typename DerivedT, typename DerivedA, typename DerivedW>
Matrix<typename DerivedT::Scalar> propagate_raw(
    const Eigen::MatrixBase<DerivedT>& theta_prev,
    const Eigen::MatrixBase<DerivedA>& act_prev,
    const Eigen::MatrixBase<DerivedW>& weights) {
  if (theta_prev.rows() != act_prev.size() || act_prev.size() != weights.rows()) {
    throw ShapeError("propagate_raw: compositions " + shape_string(theta_prev) +
                     ", activations of length " + std::to_string(act_prev.size()) +
                     ", weights " + shape_string(weights));
  }
  const auto scaled = col_expand_mul(act_prev.cwiseAbs(), theta_prev);
  return transpose(matmul(transpose(scaled), weights));
}

/// Divides each row by its L1 norm, keeping signs. Rows with mass below
/// kDegenerateRowThreshold become zero and are listed in `degenerate_rows`.
template <typename Derived>
NormalizedRows<typename Derived::Scalar> normalize_rows(
    const Eigen::MatrixBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  require_finite(raw, "normalize_rows");
  NormalizedRows<Scalar> out{raw, {}};
  for (Index i = 0; i < raw.rows(); ++i) {
    const Scalar mass = canonical_sum(raw.row(i).cwiseAbs());
    if (mass < Scalar(kDegenerateRowThreshold)) {
      out.values.row(i).setZero();
      out.degenerate_rows.push_back(i);
    } else {
      out.values.row(i) /= mass;
    }
  }
  return out;
}

/// Forward Composition Propagation for one instance of a trained network.
CompositionTrace explain(const Network& net, const VectorXr& x);

/// Same, reusing an activation trace already computed for `net`.
CompositionTrace explain(const Network& net, const ActivationTrace& activations);

/// Explanation export: {"instance", "degenerate_rows", "layers"}.
nlohmann::json explanation_to_json(const CompositionTrace& trace, const VectorXr& x);

}  // namespace fcp
