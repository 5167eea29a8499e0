#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "encinit/augmented_model.hpp"
#include "encinit/config.hpp"
#include "encinit/encoder_init.hpp"
#include "encinit/msd.hpp"

namespace encinit {

/// Dataset directory: est.csv, val.csv, test.csv and manifest.cfg (the generating config).
void write_dataset_dir(const DatasetSplits& splits, const ExperimentConfig& cfg, const std::string& dir);
DatasetSplits read_dataset_dir(const std::string& dir);

std::shared_ptr<const MsdBaseline> make_baseline(const ExperimentConfig& cfg);

/// RNG stream ids owned by one (method, run) pair.
struct RunStreams {
  std::uint64_t encoder;
  std::uint64_t augmentation;
  std::uint64_t pretrain;
  std::uint64_t train;
};
RunStreams run_streams(InitMethod method, Index run);

struct InitOutcome {
  EncoderNet encoder;
  double init_ms = 0.0;
  std::vector<std::string> warnings;
};

/// Builds an encoder of the configured shape and initialises it; init_ms covers the whole method.
InitOutcome initialise_encoder(InitMethod method, const ExperimentConfig& cfg, const NonlinearBaseline& baseline,
                               const IoDataset& est, Index run = 0);

/// encoder.csv plus encoder.meta (method, shape, timing, seed).
void save_encoder_dir(const InitOutcome& init, InitMethod method, const ExperimentConfig& cfg,
                      const std::string& dir);
EncoderNet load_encoder_dir(const std::string& dir);

/// encoder.csv, f_aug.csv and model.meta.
void save_model_dir(const AugmentedModel& model, const std::string& dir);
AugmentedModel load_model_dir(const std::string& dir, BaselinePtr baseline);

struct EvalResult {
  double test_rmse = 0.0;
  std::vector<double> tstep_rmse;  // per configured validation horizon, on the test record
};
EvalResult evaluate(const AugmentedModel& model, const IoDataset& test, const ExperimentConfig& cfg);

struct RunRecord {
  InitMethod method = InitMethod::random;
  Index run = 0;
  bool ok = false;
  bool initialised = false;  // init finished, so init_ms is valid even if training failed
  std::string error;
  double init_ms = 0.0;
  double test_rmse = 0.0;
  std::vector<HistoryRow> history;
};

struct MonteCarloResult {
  std::vector<RunRecord> runs;  // sorted by (method order, run)
};

/// Init, train and evaluate every (method, run) pair; failed runs are recorded and skipped.
MonteCarloResult run_montecarlo(const ExperimentConfig& cfg, const DatasetSplits& data,
                                std::ostream* progress = nullptr);

double median(std::vector<double> values);

/**
 * runs.csv     method,run,status,init_ms,test_rmse,error
 * summary.csv  method,runs_ok,runs_failed,rmse_min,rmse_median,rmse_max,init_ms_median
 * curves.csv   method,epoch,val_rmse_T<h>... (per-epoch medians over successful runs)
 */
void write_montecarlo(const MonteCarloResult& mc, const ExperimentConfig& cfg, const std::string& dir);

// Subcommands, each writing into `out_dir`.
DatasetSplits cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir);
InitOutcome cmd_init(const ExperimentConfig& cfg, InitMethod method, const std::string& dataset_dir,
                     const std::string& out_dir);
TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir, const std::string& encoder_dir,
                      const std::string& out_dir);
MonteCarloResult cmd_montecarlo(const ExperimentConfig& cfg, const std::string& out_dir,
                                std::ostream* progress = nullptr);
EvalResult cmd_eval(const ExperimentConfig& cfg, const std::string& dataset_dir, const std::string& model_dir,
                    const std::string& out_dir);

}  // namespace encinit
