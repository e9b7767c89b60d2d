#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "fcp/linalg.hpp"

namespace fcp {

enum class ActivationType { identity, sigmoid, tanh, relu, leaky_relu, elu, softmax };

/// Transfer function of a layer. `param` is the LeakyReLU slope or the ELU
/// alpha and is ignored by the other kinds.
struct Activation {
  ActivationType type = ActivationType::identity;
  double param = 0.0;

  static constexpr double default_leaky_slope = 0.01;
  static constexpr double default_elu_alpha = 1.0;

  static Activation identity() { return {ActivationType::identity, 0.0}; }
  static Activation sigmoid() { return {ActivationType::sigmoid, 0.0}; }
  static Activation tanh() { return {ActivationType::tanh, 0.0}; }
  static Activation relu() { return {ActivationType::relu, 0.0}; }
  static Activation leaky_relu(double slope = default_leaky_slope);
  static Activation elu(double alpha = default_elu_alpha);
  static Activation softmax() { return {ActivationType::softmax, 0.0}; }

  /// Parses the model-file name ("sigmoid", "leaky_relu", ...). `param` is
  /// taken only by leaky_relu and elu; NaN selects the default.
  static Activation from_name(std::string_view name, double param = NAN);

  std::string name() const;
  bool is_softmax() const { return type == ActivationType::softmax; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

namespace detail {

inline double sigmoid(double z) {
  // Split by sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Applies the transfer function to a pre-activation vector.
template <typename Derived>
Vector<typename Derived::Scalar> activate(const Activation& f,
                                          const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(z.size());
  switch (f.type) {
    case ActivationType::identity:
      out = z;
      break;
    case ActivationType::sigmoid:
      for (Index i = 0; i < z.size(); ++i) out(i) = detail::sigmoid(z(i));
      break;
    case ActivationType::tanh:
      out = z.array().tanh();
      break;
    case ActivationType::relu:
      out = z.array().max(Scalar(0));
      break;
    case ActivationType::leaky_relu:
      for (Index i = 0; i < z.size(); ++i)
        out(i) = z(i) > 0 ? z(i) : f.param * z(i);
      break;
    case ActivationType::elu:
      for (Index i = 0; i < z.size(); ++i)
        out(i) = z(i) > 0 ? z(i) : f.param * std::expm1(z(i));
      break;
    case ActivationType::softmax: {
      const Scalar shift = z.maxCoeff();
      out = (z.array() - shift).exp();
      out /= out.sum();
      break;
    }
  }
  return out;
}

/// Element-wise derivative da/dz given both z and a = f(z). Softmax has no
/// element-wise derivative and is handled jointly with the loss.
template <typename DerivedZ, typename DerivedA>
Vector<typename DerivedZ::Scalar> activation_derivative(
    const Activation& f, const Eigen::MatrixBase<DerivedZ>& z,
    const Eigen::MatrixBase<DerivedA>& a) {
  using Scalar = typename DerivedZ::Scalar;
  Vector<Scalar> d(z.size());
  switch (f.type) {
    case ActivationType::identity:
      d.setOnes();
      break;
    case ActivationType::sigmoid:
      d = a.array() * (Scalar(1) - a.array());
      break;
    case ActivationType::tanh:
      d = Scalar(1) - a.array().square();
      break;
    case ActivationType::relu:
      for (Index i = 0; i < z.size(); ++i) d(i) = z(i) > 0 ? 1 : 0;
      break;
    case ActivationType::leaky_relu:
      for (Index i = 0; i < z.size(); ++i) d(i) = z(i) > 0 ? 1 : f.param;
      break;
    case ActivationType::elu:
      for (Index i = 0; i < z.size(); ++i)
        d(i) = z(i) > 0 ? Scalar(1) : a(i) + f.param;
      break;
    case ActivationType::softmax:
      throw ValidationError(
          "activation_derivative: softmax has no element-wise derivative");
  }
  return d;
}

}  // namespace fcp
