#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcp/attribution.hpp"
#include "fcp/dataset.hpp"
#include "fcp/network.hpp"
#include "fcp/trainer.hpp"

namespace fcp {

/// Sample Pearson correlation. Throws NumericError when either sequence is
/// constant, ShapeError for unequal or too-short inputs.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Cohen's kappa between two label sequences. When chance agreement is 1
/// the result is 1 for identical sequences and 0 otherwise.
double cohen_kappa(std::span<const Index> a, std::span<const Index> b);

std::vector<Index> predictions(const Network& net, const Dataset& data);
double accuracy(const Network& net, const Dataset& data);

// ---------------------------------------------------------------------------
// Protected-feature analysis

struct ClassCorrelation {
  Index predicted_class = 0;
  Index count = 0;
  std::optional<double> r;  // unset when fewer than 2 instances or constant
};

struct DensityPoint {
  Index instance = 0;
  double age_value = 0.0;
  double age_composition = 0.0;
  Index predicted_class = 0;
};

struct BiasReport {
  std::string activation;
  std::vector<ClassCorrelation> age_correlation;  // one per class
  double gender_kappa = 0.0;
  std::vector<Index> predicted_counts;            // network decisions per class
  std::vector<Index> vote_counts;                 // gender composition votes per class
  Index female = 0;
  Index male = 0;
  Index degenerate_instances = 0;
  std::vector<DensityPoint> density;
};

/// For every instance: explain, take the age composition of the predicted
/// class's output neuron, correlate it with the age value within each
/// predicted class, and measure kappa between the network's predictions
/// and the gender composition votes. Degenerate decision rows are skipped.
BiasReport bias_report(const Network& net, const Dataset& test, Index age, Index gender);

nlohmann::json bias_reports_to_json(const std::vector<BiasReport>& reports);

/// CSV: instance,age_value,age_composition,predicted_class
void write_density_csv(std::ostream& out, const BiasReport& report);

// ---------------------------------------------------------------------------
// Feature flipping

/// Replaces the columns of the first k ranked features by `means`.
Dataset flip_features(const Dataset& data, const FeatureRanking& ranking, Index k,
                      const VectorXr& means);

struct FlipCurve {
  std::string activation;
  std::string ranking;  // "fcp" or "random"
  Index reps = 0;
  std::vector<double> kappa_mean;  // index k = features flipped, 0..N
  std::vector<double> kappa_std;
  std::vector<std::vector<double>> per_rep;
};

enum class FlipMeanSource { evaluation, train };

struct FlipConfig {
  std::vector<Activation> activations;
  Index reps = 20;
  double train_fraction = 0.8;
  Hyperparams hp;
  std::uint64_t base_seed = 0;
  std::optional<std::vector<Index>> hidden_widths;  // default {2N, N}
  FlipMeanSource means = FlipMeanSource::evaluation;
  bool random_baseline = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct FlipResult {
  FlipCurve fcp;
  std::optional<FlipCurve> random;  // paired over the same trained models
};

/// Repetition r uses seed base_seed + r for the split, the initialization
/// and the shuffling. Each repetition trains one model per activation,
/// ranks features by global FCP importance on the test split, then records
/// kappa(predictions on flipped test data, true labels) for k = 0..N.
std::vector<FlipResult> flip_experiment(const Dataset& problem, const FlipConfig& config);

/// CSV: activation,k,kappa_mean,kappa_std,reps
void write_flip_csv(std::ostream& out, const std::vector<FlipCurve>& curves);

}  // namespace fcp
