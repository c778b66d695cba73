// Command-line front end: train and apply multimodal matching maps, run the
// tiled-digits transfer experiment, and inspect saved models.

#include "CLI11.hpp"

#include "sgm/cli.hpp"
#include "sgm/dataio.hpp"
#include "sgm/eval.hpp"
#include "sgm/sgm.hpp"

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;  // runtime and validation errors
constexpr int kExitUsage = 2;    // malformed invocations

struct TrainOpts {
  std::vector<std::string> data_paths;
  std::vector<std::string> cov_paths;
  std::string weights_text;
  long k = 2;
  double tol = 1e-12;
  long max_iters = 100;
  std::string out_path;
};

struct ApplyOpts {
  std::string model_path;
  long modality = 0;
  std::string data_path;
  std::string out_path;
};

struct InspectOpts {
  std::string model_path;
};

struct ExperimentOpts {
  std::string images_path;
  std::string labels_path;
  std::string methods_text = "sgm";
  std::string k_text = "10";
  long n = 20;
  long knn_train = 1000;
  long knn_test = 500;
  long neighbors = 15;
  std::string weights_text = "0.2,0.8";
  unsigned long long seed = 0;
  double tol = 1e-12;
  long max_iters = 100;
  std::string out_path;
  std::string json_path;
};

// Data CSVs hold one sample per row; the solver wants one per column.
sgm::MatrixX<double> load_samples(const std::string& path) {
  return sgm::load_csv_matrix(path).transpose();
}

int run_train(const TrainOpts& opts) {
  if (opts.data_paths.size() < 2) {
    throw sgm::UsageError("train: need at least two --data files");
  }
  std::vector<sgm::MatrixX<double>> datasets;
  datasets.reserve(opts.data_paths.size());
  for (const std::string& path : opts.data_paths) {
    datasets.push_back(load_samples(path));
  }

  sgm::SgmConfig<double> config;
  config.k = opts.k;
  config.rel_tol = opts.tol;
  config.max_outer_iters = static_cast<int>(opts.max_iters);
  if (opts.weights_text.empty()) {
    if (datasets.size() != 2) {
      throw sgm::UsageError("train: --weights is required for more than two modalities");
    }
    config.weights = {1.0};
  } else {
    config.weights = sgm::parse_weight_list(opts.weights_text);
  }

  std::vector<sgm::PrescribedCovariance<double>> covs;
  if (!opts.cov_paths.empty()) {
    if (opts.cov_paths.size() != datasets.size()) {
      throw sgm::UsageError("train: need one --cov per --data (or none)");
    }
    for (const std::string& path : opts.cov_paths) {
      const sgm::MatrixX<double> c = sgm::load_csv_matrix(path);
      // Square files are full covariance matrices; rectangular ones are
      // factors whose product with their transpose is the covariance.
      covs.push_back(c.rows() == c.cols()
                         ? sgm::PrescribedCovariance<double>::from_matrix(c, opts.tol)
                         : sgm::PrescribedCovariance<double>::from_factor(c, opts.tol));
    }
  }

  const sgm::SgmModel<double> model = sgm::train<double>(datasets, covs, config);
  sgm::save_model(opts.out_path, model);

  std::cout << "modalities: " << model.modalities() << "\n";
  std::cout << "k: " << model.k << "\n";
  for (sgm::Index i = 0; i < model.modalities(); ++i) {
    std::cout << "map " << i << ": dim " << model.maps[i].a.cols() << ", rank "
              << model.ranks[static_cast<std::size_t>(i)] << "\n";
  }
  std::cout << "trace_ratio: " << sgm::format_g17(model.trace_ratio) << "\n";
  std::cout << "refine_iterations: " << model.refine_iterations << "\n";
  std::cout << "model written to " << opts.out_path << "\n";
  if (model.trace_ratio <= 0.0) {
    std::cerr << "warning: trace ratio is not positive; the matched geometry "
                 "carries no shared structure\n";
  }
  return kExitSuccess;
}

int run_apply(const ApplyOpts& opts) {
  const sgm::SgmModel<double> model = sgm::load_model(opts.model_path);
  const sgm::MatrixX<double> x = load_samples(opts.data_path);
  const sgm::MatrixX<double> y = model.apply(opts.modality, x);
  if (opts.out_path.empty()) {
    std::cout << sgm::render_csv_matrix(y.transpose());
  } else {
    sgm::save_csv_matrix(opts.out_path, y.transpose());
    std::cout << "mapped " << y.cols() << " samples to " << opts.out_path << "\n";
  }
  return kExitSuccess;
}

int run_inspect(const InspectOpts& opts) {
  const sgm::SgmModel<double> model = sgm::load_model(opts.model_path);
  std::cout << "modalities: " << model.modalities() << "\n";
  std::cout << "k: " << model.k << "\n";
  std::cout << "weights:";
  for (double w : model.weights) std::cout << ' ' << sgm::format_g17(w);
  std::cout << "\n";
  for (sgm::Index i = 0; i < model.modalities(); ++i) {
    std::cout << "map " << i << ": dim " << model.maps[i].a.cols() << ", rank "
              << model.ranks[static_cast<std::size_t>(i)] << "\n";
  }
  std::cout << "trace_ratio: " << sgm::format_g17(model.trace_ratio) << "\n";
  std::cout << "refine_iterations: " << model.refine_iterations << "\n";
  return kExitSuccess;
}

int run_experiment_cmd(const ExperimentOpts& opts) {
  const std::vector<sgm::Method> methods = sgm::parse_method_list(opts.methods_text);
  const std::vector<sgm::Index> ks = sgm::parse_k_list(opts.k_text);

  sgm::ExperimentSpec base;
  base.n_matched = opts.n;
  base.n_knn_train = opts.knn_train;
  base.n_knn_test = opts.knn_test;
  base.neighbors = static_cast<int>(opts.neighbors);
  base.weights = sgm::parse_weight_list(opts.weights_text);
  base.seed = opts.seed;
  base.rel_tol = opts.tol;
  base.max_outer_iters = static_cast<int>(opts.max_iters);

  const sgm::ImageSet images =
      sgm::load_image_set(opts.images_path, opts.labels_path);
  const sgm::TiledModalities tiles = sgm::tile_modalities(images);
  const std::vector<sgm::ExperimentResult> results =
      sgm::run_sweep(tiles, methods, ks, base);

  const std::string csv = sgm::results_to_csv(results);
  std::cout << csv;
  if (!opts.out_path.empty()) {
    std::ofstream out(opts.out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + opts.out_path);
    out << csv;
  }
  if (!opts.json_path.empty()) {
    std::ofstream out(opts.json_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + opts.json_path);
    out << sgm::results_to_json(results);
  }
  return kExitSuccess;
}

void add_experiment_flags(CLI::App* cmd, ExperimentOpts& opts) {
  cmd->add_option("--data", opts.images_path, "image file (idx3-ubyte)")->required();
  cmd->add_option("--labels", opts.labels_path, "label file (idx1-ubyte)")->required();
  cmd->add_option("--n", opts.n, "matched samples for map training");
  cmd->add_option("--knn-train", opts.knn_train, "classifier training samples");
  cmd->add_option("--knn-test", opts.knn_test, "held-out test samples");
  cmd->add_option("--neighbors", opts.neighbors, "nearest neighbours in the vote");
  cmd->add_option("--weights", opts.weights_text, "side-view weights, e.g. 0.2,0.8");
  cmd->add_option("--seed", opts.seed, "shuffle seed");
  cmd->add_option("--tol", opts.tol, "relative rank tolerance");
  cmd->add_option("--max-iters", opts.max_iters, "refinement iteration cap");
  cmd->add_option("--out", opts.out_path, "write results CSV here");
  cmd->add_option("--json", opts.json_path, "write results JSON here");
  cmd->set_config("--config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"star-graph multimodal matching"};
  app.require_subcommand(1);

  TrainOpts train_opts;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit matching maps from matched CSV samples");
  train_cmd->add_option("--data", train_opts.data_paths,
                        "sample CSV per modality, central view first (one sample per row)")
      ->required();
  train_cmd->add_option("--cov", train_opts.cov_paths,
                        "prescribed covariance CSV per modality (square matrix or factor)");
  train_cmd->add_option("--weights", train_opts.weights_text,
                        "comma-separated weights, one per non-central modality");
  train_cmd->add_option("--k", train_opts.k, "shared domain dimension")->required();
  train_cmd->add_option("--tol", train_opts.tol, "relative rank tolerance");
  train_cmd->add_option("--max-iters", train_opts.max_iters, "refinement iteration cap");
  train_cmd->add_option("--out", train_opts.out_path, "model output path")->required();
  train_cmd->set_config("--config");

  ApplyOpts apply_opts;
  CLI::App* apply_cmd =
      app.add_subcommand("apply", "map samples of one modality into the shared domain");
  apply_cmd->add_option("--model", apply_opts.model_path, "trained model path")->required();
  apply_cmd->add_option("--modality", apply_opts.modality, "modality index (0 = central)")
      ->required();
  apply_cmd->add_option("--data", apply_opts.data_path, "sample CSV (one sample per row)")
      ->required();
  apply_cmd->add_option("--out", apply_opts.out_path,
                        "output CSV path (stdout when omitted)");
  apply_cmd->set_config("--config");

  InspectOpts inspect_opts;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "print a saved model's summary");
  inspect_cmd->add_option("--model", inspect_opts.model_path, "trained model path")
      ->required();
  inspect_cmd->set_config("--config");

  ExperimentOpts experiment_opts;
  CLI::App* experiment_cmd = app.add_subcommand(
      "experiment", "run one transfer-learning method on tiled digit views");
  experiment_cmd->add_option("--method", experiment_opts.methods_text,
                             "alone01|alone02|mca01|mca02|stacked|sgm");
  experiment_cmd->add_option("--k", experiment_opts.k_text, "shared domain dimension");
  add_experiment_flags(experiment_cmd, experiment_opts);

  ExperimentOpts sweep_opts;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "run several methods across a range of domain dimensions");
  sweep_cmd->add_option("--methods", sweep_opts.methods_text,
                        "comma-separated methods, or 'all'");
  sweep_cmd->add_option("--k", sweep_opts.k_text,
                        "k values: comma list and/or a..b ranges");
  add_experiment_flags(sweep_cmd, sweep_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_opts);
    if (apply_cmd->parsed()) return run_apply(apply_opts);
    if (inspect_cmd->parsed()) return run_inspect(inspect_opts);
    if (experiment_cmd->parsed()) return run_experiment_cmd(experiment_opts);
    if (sweep_cmd->parsed()) return run_experiment_cmd(sweep_opts);
  } catch (const sgm::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
