#pragma once

#include <random>
#include <vector>

#include "fcp/network.hpp"

namespace fcp::testing {

// Two inputs, three sigmoid hidden neurons, two sigmoid outputs, zero biases.
inline Network figure1_network(const Activation& output = Activation::sigmoid()) {
  Layer hidden{make_matrix<double>({{-0.01, 0.3, 0.8}, {0.4, -0.1, 0.6}}),
               VectorXr::Zero(3), Activation::sigmoid()};
  Layer out{make_matrix<double>({{0.7, -0.5}, {-0.2, 0.1}, {0.3, 0.4}}),
            VectorXr::Zero(2), output};
  return Network(2, {hidden, out});
}

inline VectorXr figure1_input() { return make_vector<double>({0.5, 0.8}); }

inline const std::vector<Activation>& hidden_activation_kinds() {
  static const std::vector<Activation> kinds{
      Activation::identity(), Activation::sigmoid(),    Activation::tanh(),
      Activation::relu(),     Activation::leaky_relu(), Activation::elu()};
  return kinds;
}

inline MatrixXr random_matrix(std::mt19937_64& rng, Index rows, Index cols,
                              double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXr m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline VectorXr random_vector(std::mt19937_64& rng, Index n, double lo = -1.0,
                              double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXr v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

struct RandomNetOptions {
  int min_layers = 2;  // weight layers, output included
  int max_layers = 4;
  int max_width = 8;
  bool zero_biases = false;
  bool softmax_output_allowed = true;
};

// Hidden activations drawn from every element-wise kind; the output layer
// may also be softmax.
inline Network random_network(std::mt19937_64& rng, const RandomNetOptions& opt = {}) {
  std::uniform_int_distribution<int> n_layers(opt.min_layers, opt.max_layers);
  std::uniform_int_distribution<int> width(1, opt.max_width);
  const auto& kinds = hidden_activation_kinds();
  std::uniform_int_distribution<std::size_t> kind(0, kinds.size() - 1);
  std::uniform_int_distribution<std::size_t> out_kind(
      0, kinds.size() - (opt.softmax_output_allowed ? 0 : 1));

  const int L = n_layers(rng);
  const Index n_in = width(rng);
  Index prev = n_in;
  std::vector<Layer> layers;
  for (int l = 0; l < L; ++l) {
    const bool last = l == L - 1;
    const Index w = last ? std::max(2, width(rng)) : width(rng);
    Activation f;
    if (last) {
      const std::size_t k = out_kind(rng);
      f = k == kinds.size() ? Activation::softmax() : kinds[k];
    } else {
      f = kinds[kind(rng)];
    }
    VectorXr b = opt.zero_biases ? VectorXr::Zero(w) : random_vector(rng, w, -0.5, 0.5);
    layers.push_back({random_matrix(rng, prev, w), b, f});
    prev = w;
  }
  return Network(n_in, std::move(layers));
}

}  // namespace fcp::testing
