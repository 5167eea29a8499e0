#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "encinit/core.hpp"

namespace encinit {

/**
 * Stacked operators of an LTI model over a window of n+1 samples, all in
 * descending time order (block 0 = newest sample):
 *
 *   y_{k-n}^{k} = observability * x_{k-n} + toeplitz * u_{k-n}^{k}
 *                 (+ output_feedback * y_{k-n}^{k} + e_{k-n}^{k})
 *   x_k         = transition_power * x_{k-n} + state_input * u_{k-n}^{k}
 *                 (+ state_output * y_{k-n}^{k})
 *
 * For innovation-form models every block is built from the predictor pair
 * (A - K C, B - K D) and the two feedback operators are populated.
 */
struct StackedOperators {
  Index n = 0;
  Matrix observability;                  // (n+1) n_y x n_x, block j = C A^{n-j}
  Matrix toeplitz;                       // (n+1) n_y x (n+1) n_u, block upper triangular, D on diagonal
  Matrix state_input;                    // n_x x (n+1) n_u, [0, B, AB, ..., A^{n-1} B]
  std::optional<Matrix> output_feedback; // (n+1) n_y x (n+1) n_y, strictly block upper triangular
  std::optional<Matrix> state_output;    // n_x x (n+1) n_y, [0, K, AK, ..., A^{n-1} K]
  Matrix transition_power;               // A^n
};

/**
 * Linear map from a stacked window to a state estimate:
 *   x_hat = W_y * y_stack + W_u * u_stack.
 *
 * `lag` is 0 when the window ends at the sample whose state is estimated, and
 * 1 after shift_to_past_window (window ends one sample earlier).
 */
struct ReconstructabilityMaps {
  Matrix W_y;  // n_x x (n+1) n_y
  Matrix W_u;  // n_x x (n+1) n_u
  Index n = 0;
  bool noisy = false;
  Index lag = 0;
  std::vector<std::string> warnings;

  Index nx() const { return W_y.rows(); }
  Index ny() const { return W_y.cols() / (n + 1); }
  Index nu() const { return W_u.cols() / (n + 1); }
};

StackedOperators build_stacked(const LtiSS& ss, Index n);

/// Moore-Penrose left inverse of a full column rank matrix; throws UnobservableError otherwise.
Matrix left_inverse(const Matrix& O);

/// Maps of the noiseless model (K ignored): W_y = A^n O^+, W_u = r - A^n O^+ T.
ReconstructabilityMaps noiseless_maps(const LtiSS& ss, Index n);

/// Conditional-expectation maps of the innovation-form model (K required).
ReconstructabilityMaps noisy_maps(const LtiSS& ss, Index n);

Vector reconstruct(const ReconstructabilityMaps& maps, const StackedWindow& w);

/**
 * Re-expresses `maps` over a window ending one sample earlier, composing one
 * model step: x_k = A x_{k-1} + B u_{k-1} (noiseless) or
 * x_k = (A - K C) x_{k-1} + (B - K D) u_{k-1} + K y_{k-1} (innovation form).
 */
ReconstructabilityMaps shift_to_past_window(const ReconstructabilityMaps& maps, const LtiSS& ss);

/// Error matrix of the noisy maps: x_hat - x = A_tilde^n O_tilde^+ e_stack.
Matrix noise_error_gain(const LtiSS& ss, Index n);

/**
 * CSV layout:
 *   n,noisy,lag,n_x,n_y,n_u
 *   <values>
 *   matrix,row,col,value
 *   W_y,<row>,<col>,<value>   (row-major, then W_u)
 */
void write_maps_csv(const ReconstructabilityMaps& maps, std::ostream& os);
ReconstructabilityMaps read_maps_csv(std::istream& is);
void save_maps(const ReconstructabilityMaps& maps, const std::string& path);
ReconstructabilityMaps load_maps(const std::string& path);

}  // namespace encinit
