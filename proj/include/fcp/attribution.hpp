#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fcp/dataset.hpp"
#include "fcp/fcp.hpp"
#include "fcp/network.hpp"

namespace fcp {

enum class AttributionMethod { fcp, lrp };
enum class AttributionScope { instance, global };

std::string to_string(AttributionMethod method);
std::string to_string(AttributionScope scope);

/// One score per input feature.
struct FeatureAttribution {
  VectorXr scores;
  AttributionMethod method = AttributionMethod::fcp;
  AttributionScope scope = AttributionScope::instance;
};

/// Features ordered by descending score; ties keep the lower index first.
struct FeatureRanking {
  std::vector<std::pair<Index, double>> entries;

  std::vector<Index> order() const;
  /// 1-based rank of `feature`.
  Index rank_of(Index feature) const;
};

FeatureRanking rank_features(const VectorXr& scores);

/// |compositions| of the output neuron that decides the class of `x`.
/// Throws DegenerateAttributionError when that row is all zeros.
FeatureAttribution instance_importance(const CompositionTrace& trace, const Network& net,
                                       const VectorXr& x);

/// Same with an explicit decision neuron.
FeatureAttribution instance_importance(const CompositionTrace& trace, Index decision_neuron);

struct GlobalAttribution {
  FeatureAttribution mean;
  FeatureRanking ranking;
  Index instances_used = 0;
  Index degenerate_instances = 0;
};

/// Mean FCP instance importance over every instance of `data`. Instances
/// whose decision row is degenerate are skipped and counted.
GlobalAttribution global_importance(const Network& net, const Dataset& data);

/// Output neuron with the largest signed composition for `feature`; ties go
/// to the lowest index.
Index composition_class_vote(const CompositionTrace& trace, Index feature);

inline constexpr double kDefaultLrpEpsilon = 1.0e-9;

/// LRP with the epsilon rule. Relevance starts at the pre-activation score
/// of the predicted class and flows back to the inputs.
FeatureAttribution lrp_epsilon(const Network& net, const VectorXr& x,
                               double epsilon = kDefaultLrpEpsilon);

/// Same, seeding the given output neuron.
FeatureAttribution lrp_epsilon(const Network& net, const VectorXr& x, double epsilon,
                               Index seed_neuron);

/// Pre-activation score of `neuron` in the output layer.
double output_logit(const Network& net, const VectorXr& x, Index neuron);

/// Mean |LRP relevance| over every instance of `data`.
GlobalAttribution global_lrp(const Network& net, const Dataset& data,
                             double epsilon = kDefaultLrpEpsilon);

/// CSV: feature,name,score,method,scope
void write_attribution_csv(std::ostream& out, const FeatureAttribution& attribution,
                           const std::vector<std::string>& feature_names);

}  // namespace fcp
