#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fcp/dataset.hpp"
#include "fcp/network.hpp"

namespace fcp {

struct Hyperparams {
  double learning_rate = 0.001;
  Index epochs = 100;
  Index batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // Weights of the bias and regularization terms of bias_penalized_loss.
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // Sum |theta| instead of signed theta in the bias term.
  bool absolute_bias_term = false;
  // Optional L2 penalty on bias weights during training (0 disables it).
  double bias_l2 = 0.0;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network network;
  TrainReport report;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
};

/// Per-class shuffled partition; each class contributes
/// round(fraction * count) instances to the training side.
Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Hidden widths {2N, N} for N input features.
std::vector<Index> case_study_hidden_widths(Index n_features);

/// Glorot-uniform weights, zero biases, softmax output.
Network make_network(Index n_inputs, const std::vector<Index>& hidden_widths, Index n_outputs,
                     const Activation& hidden, std::uint64_t seed);

/// -log softmax(logits)[label], evaluated in log space.
double softmax_cross_entropy(const VectorXr& logits, Index label);

/// d/dlogits of softmax_cross_entropy: softmax(logits) - onehot(label).
VectorXr softmax_cross_entropy_grad(const VectorXr& logits, Index label);

/// Parameter-shaped storage: gradients, optimizer moments.
struct Gradients {
  std::vector<MatrixXr> weights;
  std::vector<VectorXr> biases;

  static Gradients zeros_like(const std::vector<Layer>& layers);
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Mean softmax cross-entropy over the given rows and its exact gradient by
/// backpropagation. The network must have a softmax output layer.
LossAndGradients cross_entropy_gradients(const Network& net, const MatrixXr& instances,
                                         const std::vector<Index>& labels);

/// Adam with bias correction.
class Adam {
 public:
  Adam(const Hyperparams& hp, const std::vector<Layer>& layers);

  void step(std::vector<Layer>& layers, const Gradients& grads);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  Gradients m_, v_;
};

/// Mini-batch Adam on softmax cross-entropy. Shuffling is driven by hp.seed.
/// When `test` is given its accuracy lands in the report.
TrainResult train(const Network& net, const Dataset& train_data, const Hyperparams& hp,
                  const Dataset* test = nullptr);

struct BiasPenalizedLoss {
  double total = 0.0;
  double error_term = 0.0;
  double bias_term = 0.0;
  double reg_term = 0.0;
  Index degenerate_rows = 0;
};

/// Diagnostic value of the bias-penalized loss for one instance:
/// squared output error + lambda1 * sum of the protected feature's
/// compositions over all non-input neurons + lambda2 * sum of squared
/// weights. No gradient flows through the compositions.
BiasPenalizedLoss bias_penalized_loss(const Network& net, const VectorXr& x,
                                      const VectorXr& target, Index protected_feature,
                                      const Hyperparams& hp);

/// CSV: epoch,mean_loss
void write_train_report_csv(std::ostream& out, const TrainReport& report);

}  // namespace fcp
