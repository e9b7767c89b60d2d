#include "fcp/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "fcp/csv_format.hpp"
#include "fcp/fcp.hpp"

namespace fcp {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ShapeError("pearson: sequences of length " + std::to_string(xs.size()) + " and " +
                     std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw ShapeError("pearson: need at least 2 observations");
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cohen_kappa(std::span<const Index> a, std::span<const Index> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("cohen_kappa: sequences of length " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  std::map<Index, double> pa, pb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const auto n = static_cast<double>(a.size());
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, count] : pa) {
    if (auto it = pb.find(label); it != pb.end()) p_e += (count / n) * (it->second / n);
  }
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<Index> predictions(const Network& net, const Dataset& data) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(data.n_instances()));
  for (Index r = 0; r < data.n_instances(); ++r) out.push_back(predict(net, data.instance(r)));
  return out;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.n_instances() == 0) throw ValidationError("accuracy: empty dataset");
  const auto pred = predictions(net, data);
  Index hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------

BiasReport bias_report(const Network& net, const Dataset& test, Index age, Index gender) {
  if (age < 0 || age >= net.input_width() || gender < 0 || gender >= net.input_width()) {
    throw ShapeError("bias_report: protected feature index out of range");
  }
  if (test.n_features() != net.input_width()) {
    throw ShapeError("bias_report: dataset/network feature count mismatch");
  }
  const Index classes = net.output_width();
  const Index output_layer = static_cast<Index>(net.layers().size());
  BiasReport report;
  report.activation = net.layers().front().activation.name();
  report.predicted_counts.assign(static_cast<std::size_t>(classes), 0);
  report.vote_counts.assign(static_cast<std::size_t>(classes), 0);

  std::vector<std::vector<double>> ages(static_cast<std::size_t>(classes));
  std::vector<std::vector<double>> comps(static_cast<std::size_t>(classes));
  std::vector<Index> predicted, votes;
  for (Index r = 0; r < test.n_instances(); ++r) {
    const VectorXr x = test.instance(r);
    const auto activations = forward(net, x);
    const auto trace = explain(net, activations);
    const Index pred = argmax_lowest(activations.output());
    if (trace.is_degenerate(output_layer, pred)) {
      ++report.degenerate_instances;
      continue;
    }
    const Index vote = composition_class_vote(trace, gender);
    const double age_comp = trace.output()(pred, age);
    predicted.push_back(pred);
    votes.push_back(vote);
    ++report.predicted_counts[static_cast<std::size_t>(pred)];
    ++report.vote_counts[static_cast<std::size_t>(vote)];
    ages[static_cast<std::size_t>(pred)].push_back(x(age));
    comps[static_cast<std::size_t>(pred)].push_back(age_comp);
    report.density.push_back({r, x(age), age_comp, pred});
  }

  const auto& gender_meta = test.features[static_cast<std::size_t>(gender)];
  auto female_it =
      std::find(gender_meta.categories.begin(), gender_meta.categories.end(), "female");
  const double female_code =
      female_it == gender_meta.categories.end()
          ? 0.0
          : static_cast<double>(female_it - gender_meta.categories.begin());
  for (Index r = 0; r < test.n_instances(); ++r) {
    (std::abs(test.instances(r, gender) - female_code) < 1e-9 ? report.female : report.male)++;
  }

  for (Index c = 0; c < classes; ++c) {
    const auto& xs = ages[static_cast<std::size_t>(c)];
    ClassCorrelation cc{c, static_cast<Index>(xs.size()), std::nullopt};
    if (xs.size() >= 2) {
      try {
        cc.r = pearson(xs, comps[static_cast<std::size_t>(c)]);
      } catch (const NumericError&) {
      }
    }
    report.age_correlation.push_back(cc);
  }
  report.gender_kappa = predicted.empty() ? 0.0 : cohen_kappa(predicted, votes);
  return report;
}

nlohmann::json bias_reports_to_json(const std::vector<BiasReport>& reports) {
  using nlohmann::json;
  json doc = json::object();
  json entries = json::array();
  for (const auto& rep : reports) {
    json corr = json::array();
    for (const auto& cc : rep.age_correlation) {
      corr.push_back({{"predicted_class", cc.predicted_class},
                      {"count", cc.count},
                      {"r", cc.r ? json(*cc.r) : json(nullptr)}});
    }
    entries.push_back({{"activation", rep.activation},
                       {"age_correlation", std::move(corr)},
                       {"gender_kappa", rep.gender_kappa},
                       {"predicted_counts", rep.predicted_counts},
                       {"gender_vote_counts", rep.vote_counts},
                       {"female", rep.female},
                       {"male", rep.male},
                       {"degenerate_instances", rep.degenerate_instances}});
  }
  doc["reports"] = std::move(entries);
  return doc;
}

void write_density_csv(std::ostream& out, const BiasReport& report) {
  out << "instance,age_value,age_composition,predicted_class\n";
  for (const auto& p : report.density) {
    out << p.instance << ',' << format_real(p.age_value) << ',' << format_real(p.age_composition)
        << ',' << p.predicted_class << '\n';
  }
}

// ---------------------------------------------------------------------------

Dataset flip_features(const Dataset& data, const FeatureRanking& ranking, Index k,
                      const VectorXr& means) {
  if (k < 0 || k > data.n_features()) {
    throw ShapeError("flip_features: k=" + std::to_string(k) + " outside [0, " +
                     std::to_string(data.n_features()) + "]");
  }
  if (means.size() != data.n_features()) {
    throw ShapeError("flip_features: " + std::to_string(means.size()) + " means for " +
                     std::to_string(data.n_features()) + " features");
  }
  if (static_cast<Index>(ranking.entries.size()) < k) {
    throw ShapeError("flip_features: ranking shorter than k");
  }
  Dataset out = data;
  for (Index i = 0; i < k; ++i) {
    const Index column = ranking.entries[static_cast<std::size_t>(i)].first;
    out.instances.col(column).setConstant(means(column));
  }
  return out;
}

namespace {

std::vector<double> kappa_curve(const Network& net, const Dataset& test,
                                const FeatureRanking& ranking, const VectorXr& means) {
  std::vector<double> curve;
  for (Index k = 0; k <= test.n_features(); ++k) {
    const auto flipped = flip_features(test, ranking, k, means);
    curve.push_back(cohen_kappa(predictions(net, flipped), test.labels));
  }
  return curve;
}

FeatureRanking random_ranking(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  FeatureRanking r;
  for (Index f : perm) r.entries.emplace_back(f, 0.0);
  return r;
}

FlipCurve summarize(std::string activation, std::string ranking,
                    std::vector<std::vector<double>> per_rep) {
  FlipCurve c;
  c.activation = std::move(activation);
  c.ranking = std::move(ranking);
  c.reps = static_cast<Index>(per_rep.size());
  const std::size_t points = per_rep.front().size();
  for (std::size_t k = 0; k < points; ++k) {
    double mean = 0.0;
    for (const auto& rep : per_rep) mean += rep[k];
    mean /= static_cast<double>(per_rep.size());
    double var = 0.0;
    for (const auto& rep : per_rep) var += (rep[k] - mean) * (rep[k] - mean);
    const double sd =
        per_rep.size() > 1 ? std::sqrt(var / static_cast<double>(per_rep.size() - 1)) : 0.0;
    c.kappa_mean.push_back(mean);
    c.kappa_std.push_back(sd);
  }
  c.per_rep = std::move(per_rep);
  return c;
}

struct RepOutcome {
  std::vector<double> fcp;
  std::vector<double> random;
};

RepOutcome run_repetition(const Dataset& problem, const FlipConfig& config,
                          const Activation& activation, Index rep) {
  const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(rep);
  const auto split = stratified_split(problem, config.train_fraction, seed);
  const Index n = problem.n_features();
  const auto hidden = config.hidden_widths.value_or(case_study_hidden_widths(n));
  Hyperparams hp = config.hp;
  hp.seed = seed;
  const auto init = make_network(n, hidden, problem.n_classes(), activation, seed);
  const auto trained = train(init, split.train, hp).network;

  const auto ranking = global_importance(trained, split.test).ranking;
  const Dataset& mean_source =
      config.means == FlipMeanSource::train ? split.train : split.test;
  const VectorXr means = mean_source.instances.colwise().mean().transpose();

  RepOutcome out;
  out.fcp = kappa_curve(trained, split.test, ranking, means);
  if (config.random_baseline) {
    out.random = kappa_curve(trained, split.test, random_ranking(n, seed), means);
  }
  return out;
}

}  // namespace

std::vector<FlipResult> flip_experiment(const Dataset& problem, const FlipConfig& config) {
  if (config.reps < 1) throw ValidationError("flip_experiment: reps must be >= 1");
  if (config.activations.empty()) throw ValidationError("flip_experiment: no activations");
  config.hp.validate();

  const std::size_t n_act = config.activations.size();
  const auto reps = static_cast<std::size_t>(config.reps);
  const std::size_t jobs = n_act * reps;
  std::vector<RepOutcome> outcomes(jobs);

  unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < jobs;) {
      try {
        outcomes[job] = run_repetition(problem, config, config.activations[job / reps],
                                       static_cast<Index>(job % reps));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<FlipResult> results;
  for (std::size_t a = 0; a < n_act; ++a) {
    std::vector<std::vector<double>> fcp_runs, random_runs;
    for (std::size_t r = 0; r < reps; ++r) {
      fcp_runs.push_back(std::move(outcomes[a * reps + r].fcp));
      if (config.random_baseline) random_runs.push_back(std::move(outcomes[a * reps + r].random));
    }
    const auto name = config.activations[a].name();
    FlipResult result{summarize(name, "fcp", std::move(fcp_runs)), std::nullopt};
    if (config.random_baseline) result.random = summarize(name, "random", std::move(random_runs));
    results.push_back(std::move(result));
  }
  return results;
}

void write_flip_csv(std::ostream& out, const std::vector<FlipCurve>& curves) {
  out << "activation,k,kappa_mean,kappa_std,reps\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.kappa_mean.size(); ++k) {
      out << c.activation << ',' << k << ',' << format_real(c.kappa_mean[k]) << ','
          << format_real(c.kappa_std[k]) << ',' << c.reps << '\n';
    }
  }
}

}  // namespace fcp
