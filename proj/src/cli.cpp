#include "fcp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcp/attribution.hpp"
#include "fcp/csv_format.hpp"
#include "fcp/dataset.hpp"
#include "fcp/evaluation.hpp"
#include "fcp/fcp.hpp"
#include "fcp/network.hpp"
#include "fcp/trainer.hpp"

namespace fcp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataOptions {
  std::string data;
  std::string format = "csv";
  std::string schema;
  std::string scaler = "all";
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

struct TrainOptions {
  std::string activation = "elu";
  Index epochs = 100;
  double lr = 0.001;
  Index batch = 32;
  double bias_l2 = 0.0;
};

struct Problem {
  Dataset data;  // scaled
  Split split;   // scaled halves
  MinMaxScaler scaler;
};

void add_data_options(CLI::App* cmd, DataOptions& o, bool require_data = true) {
  auto* data = cmd->add_option("--data", o.data, "dataset file");
  if (require_data) data->required();
  cmd->add_option("--format", o.format, "csv or uci-german")
      ->check(CLI::IsMember({"csv", "uci-german"}));
  cmd->add_option("--schema", o.schema, "JSON schema sidecar for --format csv");
  cmd->add_option("--scaler", o.scaler, "fit the min-max scaler on all data or the train split")
      ->check(CLI::IsMember({"all", "train"}));
  cmd->add_option("--seed", o.seed, "seed for the split, initialization and shuffling");
  cmd->add_option("--train-fraction", o.train_fraction, "stratified train share")
      ->check(CLI::Range(0.0, 1.0));
}

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", o.batch, "mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--bias-l2", o.bias_l2, "L2 penalty on bias weights")
      ->check(CLI::NonNegativeNumber);
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(flag) + ": no such file " + path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<Activation> parse_activations(const std::string& text) {
  static const std::vector<std::string> allowed{"elu", "leaky_relu", "sigmoid", "tanh", "relu"};
  std::vector<Activation> out;
  for (const auto& name : split_list(text)) {
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end()) {
      throw ConfigError("--activation: unsupported \"" + name + "\"");
    }
    out.push_back(Activation::from_name(name));
  }
  if (out.empty()) throw ConfigError("--activation: empty list");
  return out;
}

Dataset load_raw(const DataOptions& o) {
  require_file(o.data, "--data");
  if (o.format == "uci-german") return recode_german_gender(load_uci_german(fs::path(o.data)));
  require_file(o.schema, "--schema");
  return load_csv(fs::path(o.data), load_schema(fs::path(o.schema)));
}

Problem load_problem(const DataOptions& o) {
  const Dataset raw = load_raw(o);
  const Split raw_split = stratified_split(raw, o.train_fraction, o.seed);
  Problem p;
  p.scaler = MinMaxScaler::fit(o.scaler == "train" ? raw_split.train : raw);
  p.data = p.scaler.transform(raw);
  p.split.train_rows = raw_split.train_rows;
  p.split.test_rows = raw_split.test_rows;
  p.split.train = p.data.subset(raw_split.train_rows);
  p.split.test = p.data.subset(raw_split.test_rows);
  return p;
}

Hyperparams make_hyperparams(const TrainOptions& t, std::uint64_t seed) {
  Hyperparams hp;
  hp.learning_rate = t.lr;
  hp.epochs = t.epochs;
  hp.batch_size = t.batch;
  hp.bias_l2 = t.bias_l2;
  hp.seed = seed;
  return hp;
}

TrainResult train_case_study(const Problem& p, const Activation& activation,
                             const TrainOptions& t, std::uint64_t seed) {
  const Index n = p.data.n_features();
  const auto init =
      make_network(n, case_study_hidden_widths(n), p.data.n_classes(), activation, seed);
  return train(init, p.split.train, make_hyperparams(t, seed), &p.split.test);
}

/// Writes via a temporary sibling and renames into place.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    body(out);
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path prepare_out(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("--out: cannot create " + dir);
  return fs::path(dir);
}

json scaler_json(const MinMaxScaler& s) {
  return {{"min", std::vector<double>(s.min.data(), s.min.data() + s.min.size())},
          {"max", std::vector<double>(s.max.data(), s.max.data() + s.max.size())},
          {"constant_columns", s.constant_columns}};
}

Dataset select_subset(const Problem& p, const std::string& subset) {
  return subset == "test" ? p.split.test : p.data;
}

// ---------------------------------------------------------------------------

int cmd_train(const DataOptions& d, const TrainOptions& t, const std::string& out_dir,
              std::ostream& out) {
  const auto activations = parse_activations(t.activation);
  if (activations.size() != 1) throw ConfigError("train: exactly one --activation expected");
  const fs::path dir = prepare_out(out_dir);
  const Problem p = load_problem(d);
  const auto result = train_case_study(p, activations.front(), t, d.seed);

  write_atomically(dir / "model.json", [&](std::ostream& o) { save_model(result.network, o); });
  write_atomically(dir / "train_report.csv",
                   [&](std::ostream& o) { write_train_report_csv(o, result.report); });
  json metrics{{"activation", activations.front().name()},
               {"seed", d.seed},
               {"epochs", t.epochs},
               {"learning_rate", t.lr},
               {"batch_size", t.batch},
               {"hidden_widths", case_study_hidden_widths(p.data.n_features())},
               {"n_train", p.split.train.n_instances()},
               {"n_test", p.split.test.n_instances()},
               {"final_loss", result.report.epoch_loss.back()},
               {"train_accuracy", result.report.train_accuracy},
               {"test_accuracy", result.report.test_accuracy.value_or(NAN)},
               {"features", p.data.feature_names()},
               {"classes", p.data.class_names},
               {"scaler", scaler_json(p.scaler)}};
  write_atomically(dir / "report.json", [&](std::ostream& o) { o << metrics.dump(2) << '\n'; });
  out << "train: test accuracy " << *result.report.test_accuracy << " (train "
      << result.report.train_accuracy << "), artifacts in " << dir.string() << '\n';
  return kSuccess;
}

int cmd_explain(const std::string& model_path, const std::string& input,
                const std::string& out_dir, std::ostream& out) {
  require_file(model_path, "--model");
  const Network net = load_model(fs::path(model_path));
  std::vector<double> values;
  for (const auto& item : split_list(input)) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--input: \"" + item + "\" is not a number");
    }
  }
  if (values.empty()) throw ConfigError("--input: empty instance");
  const VectorXr x = make_vector(std::span<const double>(values));
  const auto doc = explanation_to_json(explain(net, x), x);
  if (out_dir.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    const fs::path dir = prepare_out(out_dir);
    write_atomically(dir / "explanation.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
  }
  return kSuccess;
}

int cmd_importance(const DataOptions& d, const std::string& model_path,
                   const std::string& subset, const std::string& out_dir, std::ostream& out) {
  require_file(model_path, "--model");
  const fs::path dir = prepare_out(out_dir);
  const Network net = load_model(fs::path(model_path));
  const Problem p = load_problem(d);
  const auto g = global_importance(net, select_subset(p, subset));
  write_atomically(dir / "importance.csv", [&](std::ostream& o) {
    write_attribution_csv(o, g.mean, p.data.feature_names());
  });
  json summary{{"instances_used", g.instances_used},
               {"degenerate_instances", g.degenerate_instances},
               {"ranking", g.ranking.order()}};
  write_atomically(dir / "importance.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
  out << "importance: top feature " << p.data.features[g.ranking.order().front()].name
      << ", " << g.degenerate_instances << " degenerate instances skipped\n";
  return kSuccess;
}

int cmd_compare(const DataOptions& d, const std::string& model_path, const std::string& subset,
                double epsilon, const std::string& out_dir, std::ostream& out) {
  require_file(model_path, "--model");
  const fs::path dir = prepare_out(out_dir);
  const Network net = load_model(fs::path(model_path));
  const Problem p = load_problem(d);
  const Dataset data = select_subset(p, subset);
  const auto fcp_global = global_importance(net, data);
  const auto lrp_global = global_lrp(net, data, epsilon);
  const auto names = p.data.feature_names();

  write_atomically(dir / "fcp_attribution.csv",
                   [&](std::ostream& o) { write_attribution_csv(o, fcp_global.mean, names); });
  write_atomically(dir / "lrp_attribution.csv",
                   [&](std::ostream& o) { write_attribution_csv(o, lrp_global.mean, names); });
  write_atomically(dir / "compare.csv", [&](std::ostream& o) {
    o << "feature,name,fcp_score,lrp_score,fcp_rank,lrp_rank\n";
    for (Index i = 0; i < net.input_width(); ++i) {
      o << i << ',' << csv_field(names[static_cast<std::size_t>(i)]) << ','
        << format_real(fcp_global.mean.scores(i)) << ','
        << format_real(lrp_global.mean.scores(i)) << ',' << fcp_global.ranking.rank_of(i) << ','
        << lrp_global.ranking.rank_of(i) << '\n';
    }
  });
  out << "compare: FCP scores are L1-normalized per instance, LRP relevances are not; "
         "the magnitudes are not directly comparable, compare the rankings.\n";
  return kSuccess;
}

int cmd_bias_report(const DataOptions& d, const TrainOptions& t, const std::string& model_path,
                    const std::string& protected_names, const std::string& out_dir,
                    std::ostream& out) {
  const auto names = split_list(protected_names);
  if (names.size() != 2) throw ConfigError("--protected: expected AGE,GENDER feature names");
  const fs::path dir = prepare_out(out_dir);
  const Problem p = load_problem(d);
  const Index age = p.data.require_feature(names[0]);
  const Index gender = p.data.require_feature(names[1]);

  std::vector<Network> models;
  if (!model_path.empty()) {
    require_file(model_path, "--model");
    models.push_back(load_model(fs::path(model_path)));
  } else {
    for (const auto& activation : parse_activations(t.activation)) {
      models.push_back(train_case_study(p, activation, t, d.seed).network);
    }
  }
  std::vector<BiasReport> reports;
  for (const auto& net : models) {
    reports.push_back(bias_report(net, p.split.test, age, gender));
    write_atomically(dir / ("bias_density_" + reports.back().activation + ".csv"),
                     [&](std::ostream& o) { write_density_csv(o, reports.back()); });
  }
  json doc = bias_reports_to_json(reports);
  doc["seed"] = d.seed;
  doc["age_feature"] = names[0];
  doc["gender_feature"] = names[1];
  doc["class_names"] = p.data.class_names;
  doc["n_test"] = p.split.test.n_instances();
  write_atomically(dir / "bias_report.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
  for (const auto& r : reports) {
    out << "bias-report[" << r.activation << "]: kappa " << r.gender_kappa;
    for (const auto& cc : r.age_correlation) {
      out << ", r(class " << cc.predicted_class << ") ";
      if (cc.r) out << *cc.r; else out << "n/a";
    }
    out << '\n';
  }
  return kSuccess;
}

int cmd_flip(const DataOptions& d, const TrainOptions& t, Index reps,
             const std::string& mean_source, unsigned threads, const std::string& out_dir,
             std::ostream& out) {
  const fs::path dir = prepare_out(out_dir);
  const Dataset raw = load_raw(d);
  const Dataset data = minmax_scale(raw).data;
  FlipConfig config;
  config.activations = parse_activations(t.activation);
  config.reps = reps;
  config.train_fraction = d.train_fraction;
  config.hp = make_hyperparams(t, d.seed);
  config.base_seed = d.seed;
  config.means = mean_source == "train" ? FlipMeanSource::train : FlipMeanSource::evaluation;
  config.threads = threads;
  const auto results = flip_experiment(data, config);

  std::vector<FlipCurve> fcp_curves, random_curves;
  for (const auto& r : results) {
    fcp_curves.push_back(r.fcp);
    if (r.random) random_curves.push_back(*r.random);
  }
  write_atomically(dir / "flip_curves.csv",
                   [&](std::ostream& o) { write_flip_csv(o, fcp_curves); });
  write_atomically(dir / "flip_curves_random.csv",
                   [&](std::ostream& o) { write_flip_csv(o, random_curves); });
  for (const auto& c : fcp_curves) {
    out << "flip[" << c.activation << "]: kappa " << c.kappa_mean.front() << " -> "
        << c.kappa_mean.back() << " over " << c.reps << " reps\n";
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forward Composition Propagation: explain, train and evaluate feed-forward "
               "classifiers"};
  app.name("fcp");
  app.require_subcommand(1);

  DataOptions data;
  TrainOptions training;
  std::string out_dir, model, input, subset = "all", protected_names = "age,gender";
  std::string flip_means = "evaluation";
  double epsilon = kDefaultLrpEpsilon;
  Index reps = 20;
  unsigned threads = 0;

  auto* train_cmd = app.add_subcommand("train", "train the 2N/N case-study network");
  add_data_options(train_cmd, data);
  add_train_options(train_cmd, training);
  train_cmd->add_option("--activation", training.activation, "hidden activation");
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* explain_cmd = app.add_subcommand("explain", "composition vectors for one instance");
  explain_cmd->add_option("--model", model, "model JSON")->required();
  explain_cmd->add_option("--input", input, "comma-separated feature values")->required();
  explain_cmd->add_option("--out", out_dir, "output directory (stdout when omitted)");

  auto* importance_cmd = app.add_subcommand("importance", "global FCP feature importance");
  add_data_options(importance_cmd, data);
  importance_cmd->add_option("--model", model, "model JSON")->required();
  importance_cmd->add_option("--subset", subset, "all or test")
      ->check(CLI::IsMember({"all", "test"}));
  importance_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* compare_cmd = app.add_subcommand("compare", "FCP vs LRP-epsilon global attribution");
  add_data_options(compare_cmd, data);
  compare_cmd->add_option("--model", model, "model JSON")->required();
  compare_cmd->add_option("--subset", subset, "all or test")
      ->check(CLI::IsMember({"all", "test"}));
  compare_cmd->add_option("--epsilon", epsilon, "LRP epsilon")->check(CLI::PositiveNumber);
  compare_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string bias_activations = "elu,leaky_relu,sigmoid,tanh";
  auto* bias_cmd = app.add_subcommand("bias-report", "protected-feature composition analysis");
  add_data_options(bias_cmd, data);
  add_train_options(bias_cmd, training);
  bias_cmd->add_option("--model", model, "model JSON (trains one per --activation if omitted)");
  bias_cmd->add_option("--activation", bias_activations, "comma-separated hidden activations");
  bias_cmd->add_option("--protected", protected_names, "AGE,GENDER feature names");
  bias_cmd->add_option("--out", out_dir, "output directory")->required();

  std::string flip_activations = "elu,sigmoid,tanh";
  auto* flip_cmd = app.add_subcommand("flip", "feature-flipping validation");
  add_data_options(flip_cmd, data);
  add_train_options(flip_cmd, training);
  flip_cmd->add_option("--activation", flip_activations, "comma-separated hidden activations");
  flip_cmd->add_option("--reps", reps, "repetitions")->check(CLI::PositiveNumber);
  flip_cmd->add_option("--flip-means", flip_means, "evaluation or train split means")
      ->check(CLI::IsMember({"evaluation", "train"}));
  flip_cmd->add_option("--threads", threads, "worker threads (0: all cores)");
  flip_cmd->add_option("--out", out_dir, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "fcp: " << e.what() << '\n';
    return kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "train") return cmd_train(data, training, out_dir, out);
    if (command == "explain") return cmd_explain(model, input, out_dir, out);
    if (command == "importance") return cmd_importance(data, model, subset, out_dir, out);
    if (command == "compare") return cmd_compare(data, model, subset, epsilon, out_dir, out);
    if (command == "bias-report") {
      training.activation = bias_activations;
      return cmd_bias_report(data, training, model, protected_names, out_dir, out);
    }
    training.activation = flip_activations;
    return cmd_flip(data, training, reps, flip_means, threads, out_dir, out);
  } catch (const ConfigError& e) {
    err << "fcp " << command << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    err << "fcp " << command << ": " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "fcp " << command << ": " << e.what() << '\n';
    return kDataError;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fcp::cli
