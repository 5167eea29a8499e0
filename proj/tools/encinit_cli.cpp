#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "encinit/experiment.hpp"

using namespace encinit;

namespace {

constexpr int kUsageError = 1;
constexpr int kNumericalError = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string method;
  std::optional<Index> workers;
  std::optional<Index> runs;
  std::string dataset_dir;
  std::string encoder_dir;
  std::string model_dir;
};

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.mc_workers = *o.workers;
  if (o.runs) cfg.mc_runs = *o.runs;
  if (!o.method.empty()) cfg.mc_methods = {parse_init_method(o.method)};
  cfg.sync();
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config file (key = value with [sections])")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the experiment seed");
  cmd->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encoder initialisation experiments on the mass-spring-damper benchmark"};
  app.require_subcommand(1);
  Options o;

  auto* generate = app.add_subcommand("generate", "Generate est/val/test datasets");
  add_common(generate, o);

  auto* init = app.add_subcommand("init", "Initialise an encoder from a dataset directory");
  add_common(init, o);
  init->add_option("dataset", o.dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  init->add_option("--method", o.method, "random|model|lls|ann")
      ->required()
      ->check(CLI::IsMember({"random", "model", "lls", "ann"}));

  auto* train_cmd = app.add_subcommand("train", "Train the augmented model from an initialised encoder");
  add_common(train_cmd, o);
  train_cmd->add_option("dataset", o.dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("encoder", o.encoder_dir, "Encoder directory written by init")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* montecarlo = app.add_subcommand("montecarlo", "Repeat init + train + eval per method");
  add_common(montecarlo, o);
  montecarlo->add_option("--method", o.method, "Restrict to one method")
      ->check(CLI::IsMember({"random", "model", "lls", "ann"}));
  montecarlo->add_option("--workers", o.workers, "Concurrent runs")->check(CLI::PositiveNumber);
  montecarlo->add_option("--runs", o.runs, "Runs per method")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on the test record");
  add_common(eval, o);
  eval->add_option("dataset", o.dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("model", o.model_dir, "Model directory written by train")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    const ExperimentConfig cfg = resolve_config(o);
    if (generate->parsed()) {
      const auto splits = cmd_generate(cfg, o.out);
      std::cout << "wrote est (" << splits.est.size() << "), val (" << splits.val.size() << "), test ("
                << splits.test.size() << ") to " << o.out << "\n";
    } else if (init->parsed()) {
      const auto method = parse_init_method(o.method);
      const auto r = cmd_init(cfg, method, o.dataset_dir, o.out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << to_string(method) << " init: " << r.init_ms << " ms\n";
    } else if (train_cmd->parsed()) {
      const auto r = cmd_train(cfg, o.dataset_dir, o.encoder_dir, o.out);
      std::cout << "trained " << r.history.size() << " epochs into " << o.out << "\n";
    } else if (montecarlo->parsed()) {
      const auto mc = cmd_montecarlo(cfg, o.out, &std::cerr);
      std::size_t failed = 0;
      for (const auto& r : mc.runs) failed += r.ok ? 0 : 1;
      std::cout << mc.runs.size() - failed << " runs ok, " << failed << " failed; results in " << o.out << "\n";
    } else if (eval->parsed()) {
      const auto r = cmd_eval(cfg, o.dataset_dir, o.model_dir, o.out);
      std::cout << "test simulation RMSE " << r.test_rmse << "\n";
      for (std::size_t h = 0; h < r.tstep_rmse.size(); ++h) {
        std::cout << "test T=" << cfg.train.val_horizons[h] << " RMSE " << r.tstep_rmse[h] << "\n";
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return 0;
}
