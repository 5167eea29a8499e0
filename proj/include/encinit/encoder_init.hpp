#pragma once

#include <optional>
#include <string>
#include <vector>

#include "encinit/baseline.hpp"
#include "encinit/linearize.hpp"
#include "encinit/lti_reconstruct.hpp"
#include "encinit/neural.hpp"

namespace encinit {

enum class InitMethod { random, model_based, data_based_lls, data_based_ann };

std::string to_string(InitMethod method);
/// Accepts the short CLI names (random, model, lls, ann) and the long tags.
InitMethod parse_init_method(const std::string& name);

/**
 * Encoder-layout maps derived from the baseline: window of n+1 past samples
 * ending at k-1, estimating x_k. For nonlinear baselines the maps act on
 * deviations from the equilibrium found at u* = 0, and `bias` absorbs the
 * offsets so that x_hat = W_y y_lags + W_u u_lags + bias.
 */
struct ModelBasedMaps {
  ReconstructabilityMaps maps;  // shifted to the past window
  Vector bias;
  std::optional<LinearizedModel> linearization;
};

/// n defaults to min(n_a, n_b) - 1.
ModelBasedMaps model_based_maps(const NonlinearBaseline& baseline, Index n, const std::optional<Matrix>& K = std::nullopt);

/**
 * Loads the baseline's reconstructability maps into the encoder bypass, zero
 * columns for lags beyond the map window, sets the bias and zeroes the
 * residual output layer so the encoder initially equals the map.
 */
EncoderNet init_model_based(const EncoderNet& enc, const NonlinearBaseline& baseline,
                            std::optional<Index> n = std::nullopt,
                            const std::optional<Matrix>& K = std::nullopt);

/// Baseline simulated on the measured inputs; column k of each matrix is sample k.
struct ApproxDataset {
  Matrix y_hat;
  Matrix x_hat;
  Matrix u;

  Index size() const { return u.cols(); }
};

ApproxDataset simulate_baseline(const NonlinearBaseline& baseline, const IoDataset& data, const Vector& x0);

/**
 * Approximate dataset with the default initial state: for LTI baselines the
 * state is reconstructed from the first window and the record starts there;
 * otherwise the simulation starts from zero at sample 0.
 */
ApproxDataset simulate_baseline_default(const NonlinearBaseline& baseline, const IoDataset& data, Index n_a,
                                        Index n_b);

struct LlsResult {
  EncoderNet encoder;
  Index rank = 0;
  double residual = 0.0;  // mean squared state error over the regression rows
  std::vector<std::string> warnings;
};

/// Minimum-norm least squares fit of the encoder bypass on (y_hat, u) windows against x_hat.
LlsResult init_lls(const EncoderNet& enc, const ApproxDataset& approx);

struct PretrainConfig {
  Index epochs = 50;
  Index batch_size = 256;
  AdamConfig adam{};
  std::vector<Index> hidden{16, 16};
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct PretrainResult {
  EncoderNet encoder;
  double v_enc = 0.0;
  std::vector<double> v_enc_history;  // after each epoch
};

/**
 * Fits a freshly randomised encoder of enc's shape to the baseline states by
 * minibatch Adam on the mean squared state error. Training runs in
 * standardised coordinates and the scalings are folded back into the weights.
 */
PretrainResult init_ann_pretrain(const EncoderNet& enc, const ApproxDataset& approx, const PretrainConfig& cfg);

/// Mean squared encoder state error over every window of the approximate dataset.
double encoder_state_mse(const EncoderNet& enc, const ApproxDataset& approx);

/// All parameters Glorot-uniform, including the bypass bias.
EncoderNet init_random_encoder(const EncoderNet& enc, RngStream& rng);

}  // namespace encinit
