#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "encinit/errors.hpp"

namespace encinit {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Discrete-time LTI state-space model
 *
 *   x_{k+1} = A x_k + B u_k (+ K e_k)
 *   y_k     = C x_k + D u_k (+ e_k)
 *
 * When K is present the model is in innovation form and sigma_e, if given,
 * is the covariance of the white innovation e_k.
 */
struct LtiSS {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  std::optional<Matrix> K;
  std::optional<Matrix> sigma_e;

  Index nx() const { return A.rows(); }
  Index nu() const { return B.cols(); }
  Index ny() const { return C.rows(); }
  bool innovation_form() const { return K.has_value(); }

  /// Throws DimensionError on inconsistent shapes or a non-symmetric / indefinite sigma_e.
  void validate() const;
};

/**
 * Sampled input/output record. Column k of each matrix holds sample k.
 * x_true and e_true are only filled by the simulators and used as oracles.
 */
struct IoDataset {
  Matrix u;  // n_u x N
  Matrix y;  // n_y x N
  double ts = 1.0;
  std::optional<Matrix> x_true;  // n_x x N
  std::optional<Matrix> e_true;  // n_y x N

  Index size() const { return u.cols(); }
  Index nu() const { return u.rows(); }
  Index ny() const { return y.rows(); }

  void validate() const;

  /// Samples [begin, begin + count) as a new dataset (oracle traces included).
  IoDataset slice(Index begin, Index count) const;
};

/**
 * Stacked I/O window in descending time order: block 0 holds the most recent
 * sample k, block n the oldest sample k - n.
 */
struct StackedWindow {
  Vector y_stack;  // (n+1) * n_y
  Vector u_stack;  // (n+1) * n_u
  Index n = 0;

  Index ny() const { return y_stack.size() / (n + 1); }
  Index nu() const { return u_stack.size() / (n + 1); }
  auto y_block(Index j) const { return y_stack.segment(j * ny(), ny()); }
  auto u_block(Index j) const { return u_stack.segment(j * nu(), nu()); }
};

/// Window of samples k, k-1, ..., k-n. Requires n <= k < N.
StackedWindow make_window(const IoDataset& data, Index k, Index n);

/// Stacks columns k, k-1, ..., k-count+1 of `signal` into one vector.
Vector stack_descending(const Matrix& signal, Index k, Index count);

/// Singular values above max(rows, cols) * sigma_max * 1e-12.
Index numerical_rank(const Matrix& m);

/// [C A^n; C A^{n-1}; ...; C] for the given pair.
Matrix observability_matrix(const Matrix& A, const Matrix& C, Index n);

Index observability_rank(const LtiSS& ss, Index n);

double spectral_radius(const Matrix& A);

/**
 * Reproducible random stream. Identical (seed, stream_id) pairs produce
 * identical draws; different stream ids give statistically independent streams.
 */
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  Index uniform_index(Index lo, Index hi_inclusive);
  Matrix normal_matrix(Index rows, Index cols, double stddev = 1.0);
  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi);

  /// Child stream derived from this stream's seed; independent of the draws made so far.
  RngStream derive(std::uint64_t sub_id) const;

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/**
 * CSV layout: header `k,u_0..,y_0..[,x_0..][,e_0..]`, one row per sample,
 * values written with 17 significant digits. The sample time is not part of
 * the file; dataset directories record it in their manifest.
 */
void write_dataset_csv(const IoDataset& data, std::ostream& os);
IoDataset read_dataset_csv(std::istream& is, double ts);
void save_dataset(const IoDataset& data, const std::string& path);
IoDataset load_dataset(const std::string& path, double ts);

}  // namespace encinit
