#pragma once

#include <utility>

#include "encinit/baseline.hpp"
#include "encinit/core.hpp"

namespace encinit {

/**
 * Two-mass oscillator. Mass 1 is tied to the ground through (k1, c1) plus a
 * cubic damper d1 and receives the input force; mass 2 is tied to mass 1
 * through (k2, c2) plus a cubic hardening spring a2.
 * State ordering: [p1, v1, p2, v2]; measured output p2.
 */
struct MsdParams {
  double m1 = 0.5;
  double m2 = 0.4;
  double k1 = 100.0;
  double k2 = 100.0;
  double c1 = 0.5;
  double c2 = 0.5;
  double a2 = 1000.0;
  double d1 = 0.1;

  static MsdParams system() { return MsdParams{}; }
  static MsdParams baseline() {
    MsdParams p;
    p.d1 = 0.05;
    return p;
  }
  void validate() const;
};

struct SimConfig {
  double ts = 0.1;
  double ti = 0.01;
  Index n_freq = 1666;
  double band_lo = 0.0;
  double band_hi = 5.0;
  double snr_db = 20.0;
  Index n_est = 20000;
  Index n_val = 10000;
  Index n_test = 10000;
  Index transient_discard = 500;
  double input_rms = 1.0;
  /// Multisine period in samples; 0 selects the shortest period that fits n_freq bins in the band.
  Index multisine_period = 0;
  std::uint64_t seed = 1;

  int substeps() const;
  Index period() const;
  void validate() const;
};

Eigen::Vector4d msd_derivative(const Eigen::Vector4d& x, double u, const MsdParams& p);
/// d(derivative)/dx
Eigen::Matrix4d msd_jacobian(const Eigen::Vector4d& x, const MsdParams& p);
/// Linear part of the ODE: xdot = A x + B u.
std::pair<Matrix, Matrix> msd_linear_ode(const MsdParams& p);
/// Kinetic plus potential energy (including the quartic potential of the hardening spring).
double msd_energy(const Eigen::Vector4d& x, const MsdParams& p);

/// Classical fourth-order Runge-Kutta step with u held over the step.
template <class State, class Input, class Deriv>
State rk4_step(Deriv&& f, const State& x, const Input& u, double h) {
  const State k1 = f(x, u);
  const State k2 = f(State(x + (0.5 * h) * k1), u);
  const State k3 = f(State(x + (0.5 * h) * k2), u);
  const State k4 = f(State(x + h * k3), u);
  State next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw DivergenceError("RK4 step produced a non-finite state", 0);
  return next;
}

/// Discrete-time MSD: one sample = `substeps` RK4 steps of ts / substeps under held input.
class MsdBaseline final : public NonlinearBaseline {
 public:
  MsdBaseline(MsdParams p, double ts = 0.1, int substeps = 10);

  Index nx() const override { return 4; }
  Index nu() const override { return 1; }
  Index ny() const override { return 1; }

  Vector f(const Vector& x, const Vector& u) const override;
  Vector h(const Vector& x, const Vector& u) const override;
  Vector f_adjoint(const Vector& x, const Vector& u, const Vector& w) const override;
  Vector h_adjoint(const Vector& x, const Vector& u, const Vector& w) const override;

  Eigen::Vector4d step(const Eigen::Vector4d& x, double u) const;
  const MsdParams& params() const { return p_; }
  double ts() const { return ts_; }
  int substeps() const { return substeps_; }

 private:
  MsdParams p_;
  double ts_;
  int substeps_;
};

/// Clean response (1 x N outputs, 4 x N states, column k = state at sample k) to held inputs.
Trajectory simulate_system(const MsdParams& p, const Matrix& u, const SimConfig& cfg,
                           const Vector& x0 = Vector::Zero(4));

/**
 * Multisine over an N-sample period: u_k = sum_j A cos(2 pi f_j k ts + phi_j)
 * with f_j the first n_freq nonzero bins j / (N ts) inside [band_lo, band_hi],
 * phases uniform on [0, 2 pi), and A chosen so RMS(u) = target_rms.
 */
Vector multisine(Index N, Index n_freq, double band_lo, double band_hi, double ts, RngStream& rng,
                 double target_rms);

struct NoisyOutput {
  Matrix y;
  Matrix e;
};
/// Adds white Gaussian noise with per-channel sigma = RMS(y) 10^(-snr_db / 20).
NoisyOutput add_noise(const Matrix& y, double snr_db, RngStream& rng);

struct DatasetSplits {
  IoDataset est;
  IoDataset val;
  IoDataset test;
};

/// One simulated record: multisine excitation, transient dropped, noise on y only.
IoDataset make_record(const MsdParams& system, const SimConfig& cfg, Index length, RngStream& input_rng,
                      RngStream& noise_rng);

/// Estimation, validation and test records from independent streams of cfg.seed.
DatasetSplits make_datasets(const MsdParams& system, const SimConfig& cfg);

}  // namespace encinit
