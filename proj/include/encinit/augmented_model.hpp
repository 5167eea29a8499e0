#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "encinit/baseline.hpp"
#include "encinit/neural.hpp"

namespace encinit {

/**
 * Static parallel augmentation
 *
 *   x_{k+1} = f_base(x_k, u_k) + f_aug([x_k; u_k]),   y_k = h_base(x_k, u_k)
 *
 * with the initial state of every simulated section supplied by the encoder.
 */
struct AugmentedModel {
  BaselinePtr baseline;
  ResNet f_aug;
  EncoderNet encoder;

  /// f_aug gets random hidden layers and a zero output layer, so the model starts as the baseline.
  static AugmentedModel create(BaselinePtr baseline, EncoderNet encoder, RngStream& rng,
                               const std::vector<Index>& hidden = {16, 16});

  Index nx() const { return baseline->nx(); }
  void validate() const;
};

struct StepResult {
  Vector x_next;
  Vector y;
};
StepResult step(const AugmentedModel& model, const Vector& x, const Vector& u);

/// Predicted outputs y_hat_k .. y_hat_{k+T-1} (n_y x T), initial state encoded from the samples before k.
Matrix rollout(const AugmentedModel& model, const IoDataset& data, Index k, Index T);

/// Mean over sections and steps of ||y - y_hat||^2.
double loss_tstep(const AugmentedModel& model, const IoDataset& data, const std::vector<Index>& starts,
                  Index T);

struct LossGradient {
  double loss = 0.0;
  Vector encoder;  // flattened like encoder.net()
  Vector f_aug;    // flattened like f_aug
};

/// loss_tstep and its exact gradient w.r.t. encoder and f_aug parameters (reverse pass through the rollout).
LossGradient loss_and_gradient(const AugmentedModel& model, const IoDataset& data,
                               const std::vector<Index>& starts, Index T);

/// Encoder applied once at k0 = max(n_a, n_b), then open-loop simulation to the end of the record.
double rmse_simulation(const AugmentedModel& model, const IoDataset& data);

/// T-step RMSE for several horizons over a shared set of section starts.
std::vector<double> tstep_rmse(const AugmentedModel& model, const IoDataset& data,
                               const std::vector<Index>& starts, const std::vector<Index>& horizons);

/// `count` evenly spaced starts such that sections of length `horizon` fit in the record.
std::vector<Index> spaced_starts(const AugmentedModel& model, Index N, Index horizon, Index count);

struct TrainConfig {
  Index T = 200;
  Index epochs = 2000;
  Index batch_size = 3000;
  Index n_a = 9;
  Index n_b = 9;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<Index> val_horizons{5, 20, 100};
  Index val_sections = 256;

  void validate() const;
};

struct HistoryRow {
  Index epoch = 0;
  double train_loss = 0.0;
  std::vector<double> val_rmse;
  double wall_ms = 0.0;
};

struct TrainResult {
  AugmentedModel model;
  std::vector<HistoryRow> history;
};

/**
 * Joint Adam training of encoder and f_aug. Row e of the history holds the
 * state at the start of epoch e: the batch loss of that epoch and the
 * validation RMSE of the parameters before its update.
 */
TrainResult train(const AugmentedModel& initial, const IoDataset& est, const IoDataset& val,
                  const TrainConfig& cfg);

/// `epoch,train_loss,val_rmse_T<h>...,wall_ms`
void write_history_csv(const std::vector<HistoryRow>& history, const std::vector<Index>& horizons,
                       std::ostream& os);

}  // namespace encinit
