#include "fcp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "fcp/csv_format.hpp"
#include "fcp/evaluation.hpp"
#include "fcp/fcp.hpp"

namespace fcp {

void Hyperparams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("hyperparams: learning rate must be non-negative");
  }
  if (epochs < 1) throw ValidationError("hyperparams: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("hyperparams: batch size must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("hyperparams: Adam betas must lie in (0,1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("hyperparams: Adam eps must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(bias_l2 >= 0.0)) {
    throw ValidationError("hyperparams: penalty coefficients must be non-negative");
  }
}

// ---------------------------------------------------------------------------

Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("stratified_split: train fraction must lie in (0,1)");
  }
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(data.n_classes()));
  for (Index r = 0; r < data.n_instances(); ++r) {
    by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])].push_back(r);
  }
  std::mt19937_64 rng(seed);
  Split split;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      throw ValidationError("stratified_split: class \"" + data.class_names[c] +
                            "\" has fewer than 2 instances");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * rows.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    split.train_rows.insert(split.train_rows.end(), rows.begin(), rows.begin() + n_train);
    split.test_rows.insert(split.test_rows.end(), rows.begin() + n_train, rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = data.subset(split.train_rows);
  split.test = data.subset(split.test_rows);
  return split;
}

std::vector<Index> case_study_hidden_widths(Index n_features) {
  return {2 * n_features, n_features};
}

Network make_network(Index n_inputs, const std::vector<Index>& hidden_widths, Index n_outputs,
                     const Activation& hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  Index fan_in = n_inputs;
  auto add_layer = [&](Index fan_out, const Activation& f) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{MatrixXr(fan_in, fan_out), VectorXr::Zero(fan_out), f};
    for (Index i = 0; i < fan_in; ++i) {
      for (Index j = 0; j < fan_out; ++j) layer.weights(i, j) = dist(rng);
    }
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (Index w : hidden_widths) add_layer(w, hidden);
  add_layer(n_outputs, Activation::softmax());
  return Network(n_inputs, std::move(layers));
}

// ---------------------------------------------------------------------------

double softmax_cross_entropy(const VectorXr& logits, Index label) {
  if (label < 0 || label >= logits.size()) {
    throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) +
                     " outside " + std::to_string(logits.size()) + " logits");
  }
  const double shift = logits.maxCoeff();
  const double log_sum = std::log((logits.array() - shift).exp().sum()) + shift;
  return log_sum - logits(label);
}

VectorXr softmax_cross_entropy_grad(const VectorXr& logits, Index label) {
  VectorXr g = activate(Activation::softmax(), logits);
  g(label) -= 1.0;
  return g;
}

Gradients Gradients::zeros_like(const std::vector<Layer>& layers) {
  Gradients g;
  for (const auto& layer : layers) {
    g.weights.push_back(MatrixXr::Zero(layer.fan_in(), layer.fan_out()));
    g.biases.push_back(VectorXr::Zero(layer.fan_out()));
  }
  return g;
}

namespace {

void require_softmax_head(const std::vector<Layer>& layers) {
  if (!layers.back().activation.is_softmax()) {
    throw ValidationError("training requires a softmax output layer, found " +
                          layers.back().activation.name());
  }
}

// Adds the gradient of one instance's loss to `grads`; returns the loss.
double accumulate_instance(const std::vector<Layer>& layers, const VectorXr& x, Index label,
                           Gradients& grads) {
  const std::size_t n = layers.size();
  std::vector<VectorXr> a(n + 1);
  std::vector<VectorXr> z(n);
  a[0] = x;
  for (std::size_t l = 0; l < n; ++l) {
    z[l] = layers[l].weights.transpose() * a[l] + layers[l].biases;
    a[l + 1] = activate(layers[l].activation, z[l]);
  }
  const double loss = softmax_cross_entropy(z[n - 1], label);
  VectorXr delta = softmax_cross_entropy_grad(z[n - 1], label);
  for (std::size_t l = n; l-- > 0;) {
    grads.weights[l].noalias() += a[l] * delta.transpose();
    grads.biases[l] += delta;
    if (l > 0) {
      const VectorXr back = layers[l].weights * delta;
      delta = back.cwiseProduct(activation_derivative(layers[l - 1].activation, z[l - 1], a[l]));
    }
  }
  return loss;
}

double batch_gradients(const std::vector<Layer>& layers, const MatrixXr& instances,
                       const std::vector<Index>& labels, const Index* rows, std::size_t count,
                       Gradients& grads) {
  double loss = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Index r = rows[i];
    loss += accumulate_instance(layers, instances.row(r).transpose(),
                                labels[static_cast<std::size_t>(r)], grads);
  }
  const double scale = 1.0 / static_cast<double>(count);
  for (auto& w : grads.weights) w *= scale;
  for (auto& b : grads.biases) b *= scale;
  return loss * scale;
}

void reset(Gradients& g) {
  for (auto& w : g.weights) w.setZero();
  for (auto& b : g.biases) b.setZero();
}

}  // namespace

LossAndGradients cross_entropy_gradients(const Network& net, const MatrixXr& instances,
                                         const std::vector<Index>& labels) {
  require_softmax_head(net.layers());
  if (instances.cols() != net.input_width()) {
    throw ShapeError("cross_entropy_gradients: " + std::to_string(instances.cols()) +
                     " features, network expects " + std::to_string(net.input_width()));
  }
  if (static_cast<Index>(labels.size()) != instances.rows() || labels.empty()) {
    throw ShapeError("cross_entropy_gradients: label count does not match instances");
  }
  std::vector<Index> rows(labels.size());
  std::iota(rows.begin(), rows.end(), Index{0});
  LossAndGradients out{0.0, Gradients::zeros_like(net.layers())};
  out.loss = batch_gradients(net.layers(), instances, labels, rows.data(), rows.size(), out.grads);
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(const Hyperparams& hp, const std::vector<Layer>& layers)
    : lr_(hp.learning_rate),
      beta1_(hp.adam_beta1),
      beta2_(hp.adam_beta2),
      eps_(hp.adam_eps),
      m_(Gradients::zeros_like(layers)),
      v_(Gradients::zeros_like(layers)) {}

void Adam::step(std::vector<Layer>& layers, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], m_.weights[l], v_.weights[l]);
    update(layers[l].biases, grads.biases[l], m_.biases[l], v_.biases[l]);
  }
}

TrainResult train(const Network& net, const Dataset& train_data, const Hyperparams& hp,
                  const Dataset* test) {
  hp.validate();
  require_softmax_head(net.layers());
  if (train_data.n_features() != net.input_width()) {
    throw ShapeError("train: dataset has " + std::to_string(train_data.n_features()) +
                     " features, network expects " + std::to_string(net.input_width()));
  }
  if (train_data.n_classes() != net.output_width()) {
    throw ShapeError("train: " + std::to_string(train_data.n_classes()) +
                     " classes, network has " + std::to_string(net.output_width()) + " outputs");
  }
  if (train_data.n_instances() < 1) throw ValidationError("train: empty dataset");

  std::vector<Layer> layers = net.layers();
  Adam adam(hp, layers);
  Gradients grads = Gradients::zeros_like(layers);
  std::mt19937_64 rng(hp.seed);
  std::vector<Index> order(static_cast<std::size_t>(train_data.n_instances()));
  std::iota(order.begin(), order.end(), Index{0});

  TrainReport report;
  report.seed = hp.seed;
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  for (Index epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      reset(grads);
      const double loss = batch_gradients(layers, train_data.instances, train_data.labels,
                                          order.data() + start, count, grads);
      epoch_loss += loss * static_cast<double>(count);
      if (hp.bias_l2 > 0.0) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
          grads.biases[l] += 2.0 * hp.bias_l2 * layers[l].biases;
        }
      }
      adam.step(layers, grads);
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  Network trained(net.input_width(), std::move(layers));
  report.train_accuracy = accuracy(trained, train_data);
  if (test) report.test_accuracy = accuracy(trained, *test);
  return {std::move(trained), std::move(report)};
}

// ---------------------------------------------------------------------------

BiasPenalizedLoss bias_penalized_loss(const Network& net, const VectorXr& x,
                                      const VectorXr& target, Index protected_feature,
                                      const Hyperparams& hp) {
  if (protected_feature < 0 || protected_feature >= net.input_width()) {
    throw ShapeError("bias_penalized_loss: no feature " + std::to_string(protected_feature));
  }
  if (target.size() != net.output_width()) {
    throw ShapeError("bias_penalized_loss: target has " + std::to_string(target.size()) +
                     " entries, network has " + std::to_string(net.output_width()) + " outputs");
  }
  const auto activations = forward(net, x);
  const auto trace = explain(net, activations);

  BiasPenalizedLoss out;
  out.error_term = (activations.output() - target).squaredNorm();
  for (std::size_t l = 1; l < trace.layers.size(); ++l) {
    const auto column = trace.layers[l].col(protected_feature);
    out.bias_term += hp.absolute_bias_term ? column.cwiseAbs().sum() : column.sum();
  }
  out.degenerate_rows = static_cast<Index>(trace.degenerate_rows.size());
  for (const auto& layer : net.layers()) out.reg_term += layer.weights.squaredNorm();
  out.total = out.error_term + hp.lambda1 * out.bias_term + hp.lambda2 * out.reg_term;
  return out;
}

void write_train_report_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    out << e + 1 << ',' << format_real(report.epoch_loss[e]) << '\n';
  }
}

}  // namespace fcp
