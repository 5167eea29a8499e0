#include "encinit/msd.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace encinit {

void MsdParams::validate() const {
  if (!(m1 > 0.0 && m2 > 0.0)) throw ConfigError("MSD masses must be positive");
  if (k1 < 0.0 || k2 < 0.0 || c1 < 0.0 || c2 < 0.0 || a2 < 0.0 || d1 < 0.0) {
    throw ConfigError("MSD stiffness and damping coefficients must be non-negative");
  }
}

int SimConfig::substeps() const {
  const double ratio = ts / ti;
  const double rounded = std::round(ratio);
  if (!(ti > 0.0) || !(ts > 0.0) || std::abs(ratio - rounded) > 1e-9 * ratio || rounded < 1.0) {
    throw ConfigError("ts / ti must be a positive integer");
  }
  return static_cast<int>(rounded);
}

Index SimConfig::period() const {
  if (multisine_period > 0) return multisine_period;
  return static_cast<Index>(std::ceil(static_cast<double>(n_freq) / (band_hi * ts) - 1e-9));
}

void SimConfig::validate() const {
  substeps();
  if (band_hi > 1.0 / (2.0 * ts) + 1e-12) throw ConfigError("multisine band exceeds the Nyquist frequency");
  if (band_lo < 0.0 || band_lo >= band_hi) throw ConfigError("multisine band must satisfy 0 <= lo < hi");
  if (n_freq < 1 || n_est < 1 || n_val < 1 || n_test < 1 || transient_discard < 0) {
    throw ConfigError("dataset sizes and frequency count must be positive");
  }
  if (!(input_rms >= 0.0)) throw ConfigError("input_rms must be non-negative");
}

Eigen::Vector4d msd_derivative(const Eigen::Vector4d& x, double u, const MsdParams& p) {
  const double p1 = x(0), v1 = x(1), p2 = x(2), v2 = x(3);
  const double dp = p2 - p1;
  const double dv = v2 - v1;
  const double inter = p.k2 * dp + p.c2 * dv;
  Eigen::Vector4d dx;
  dx(0) = v1;
  dx(1) = (-p.k1 * p1 - p.c1 * v1 - p.d1 * v1 * v1 * v1 + inter + u) / p.m1;
  dx(2) = v2;
  dx(3) = (-inter - p.a2 * dp * dp * dp) / p.m2;
  return dx;
}

Eigen::Matrix4d msd_jacobian(const Eigen::Vector4d& x, const MsdParams& p) {
  const double v1 = x(1);
  const double dp = x(2) - x(0);
  const double spring = p.k2 + 3.0 * p.a2 * dp * dp;
  Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
  J(0, 1) = 1.0;
  J(1, 0) = -(p.k1 + p.k2) / p.m1;
  J(1, 1) = -(p.c1 + 3.0 * p.d1 * v1 * v1 + p.c2) / p.m1;
  J(1, 2) = p.k2 / p.m1;
  J(1, 3) = p.c2 / p.m1;
  J(2, 3) = 1.0;
  J(3, 0) = spring / p.m2;
  J(3, 1) = p.c2 / p.m2;
  J(3, 2) = -spring / p.m2;
  J(3, 3) = -p.c2 / p.m2;
  return J;
}

std::pair<Matrix, Matrix> msd_linear_ode(const MsdParams& p) {
  Matrix A = msd_jacobian(Eigen::Vector4d::Zero(), p);
  Matrix B = Matrix::Zero(4, 1);
  B(1, 0) = 1.0 / p.m1;
  return {A, B};
}

double msd_energy(const Eigen::Vector4d& x, const MsdParams& p) {
  const double dp = x(2) - x(0);
  return 0.5 * p.m1 * x(1) * x(1) + 0.5 * p.m2 * x(3) * x(3) + 0.5 * p.k1 * x(0) * x(0) +
         0.5 * p.k2 * dp * dp + 0.25 * p.a2 * dp * dp * dp * dp;
}

MsdBaseline::MsdBaseline(MsdParams p, double ts, int substeps) : p_(p), ts_(ts), substeps_(substeps) {
  p_.validate();
  if (!(ts > 0.0) || substeps < 1) throw ConfigError("MSD baseline needs ts > 0 and substeps >= 1");
}

Eigen::Vector4d MsdBaseline::step(const Eigen::Vector4d& x, double u) const {
  const double h = ts_ / substeps_;
  auto deriv = [this](const Eigen::Vector4d& s, double in) { return msd_derivative(s, in, p_); };
  Eigen::Vector4d s = x;
  for (int i = 0; i < substeps_; ++i) s = rk4_step(deriv, s, u, h);
  return s;
}

Vector MsdBaseline::f(const Vector& x, const Vector& u) const {
  if (x.size() != 4 || u.size() != 1) throw DimensionError("MSD baseline expects x in R^4 and u in R");
  return step(Eigen::Vector4d(x), u(0));
}

Vector MsdBaseline::h(const Vector& x, const Vector& u) const {
  if (x.size() != 4 || u.size() != 1) throw DimensionError("MSD baseline expects x in R^4 and u in R");
  return Vector::Constant(1, x(2));
}

Vector MsdBaseline::f_adjoint(const Vector& x, const Vector& u, const Vector& w) const {
  if (x.size() != 4 || u.size() != 1 || w.size() != 4) throw DimensionError("MSD adjoint dimension mismatch");
  const double h = ts_ / substeps_;
  const double uk = u(0);
  std::vector<Eigen::Vector4d> starts(static_cast<std::size_t>(substeps_));
  auto deriv = [this](const Eigen::Vector4d& s, double in) { return msd_derivative(s, in, p_); };
  Eigen::Vector4d s = x;
  for (int i = 0; i < substeps_; ++i) {
    starts[static_cast<std::size_t>(i)] = s;
    s = rk4_step(deriv, s, uk, h);
  }

  Eigen::Vector4d lam = w;
  for (int i = substeps_; i-- > 0;) {
    const Eigen::Vector4d& x0 = starts[static_cast<std::size_t>(i)];
    const Eigen::Vector4d k1 = msd_derivative(x0, uk, p_);
    const Eigen::Vector4d z2 = x0 + 0.5 * h * k1;
    const Eigen::Vector4d k2 = msd_derivative(z2, uk, p_);
    const Eigen::Vector4d z3 = x0 + 0.5 * h * k2;
    const Eigen::Vector4d k3 = msd_derivative(z3, uk, p_);
    const Eigen::Vector4d z4 = x0 + h * k3;

    const Eigen::Vector4d a4 = msd_jacobian(z4, p_).transpose() * ((h / 6.0) * lam);
    const Eigen::Vector4d a3 = msd_jacobian(z3, p_).transpose() * ((h / 3.0) * lam + h * a4);
    const Eigen::Vector4d a2 = msd_jacobian(z2, p_).transpose() * ((h / 3.0) * lam + 0.5 * h * a3);
    const Eigen::Vector4d a1 = msd_jacobian(x0, p_).transpose() * ((h / 6.0) * lam + 0.5 * h * a2);
    lam += a1 + a2 + a3 + a4;
  }
  return lam;
}

Vector MsdBaseline::h_adjoint(const Vector&, const Vector&, const Vector& w) const {
  if (w.size() != 1) throw DimensionError("MSD output adjoint dimension mismatch");
  Vector g = Vector::Zero(4);
  g(2) = w(0);
  return g;
}

Trajectory simulate_system(const MsdParams& p, const Matrix& u, const SimConfig& cfg, const Vector& x0) {
  if (u.rows() != 1) throw DimensionError("MSD input must be scalar");
  if (x0.size() != 4) throw DimensionError("MSD state must have 4 entries");
  const MsdBaseline model(p, cfg.ts, cfg.substeps());
  const Index N = u.cols();
  Trajectory t{Matrix(4, N), Matrix(1, N)};
  Eigen::Vector4d x = x0;
  for (Index k = 0; k < N; ++k) {
    t.x.col(k) = x;
    t.y(0, k) = x(2);
    try {
      x = model.step(x, u(0, k));
    } catch (const DivergenceError&) {
      throw DivergenceError("MSD simulation diverged", k);
    }
  }
  return t;
}

Vector multisine(Index N, Index n_freq, double band_lo, double band_hi, double ts, RngStream& rng,
                 double target_rms) {
  if (N < 1 || n_freq < 1) throw ConfigError("multisine needs N >= 1 and n_freq >= 1");
  if (band_hi > 1.0 / (2.0 * ts) + 1e-12) throw ConfigError("multisine band exceeds the Nyquist frequency");
  std::vector<Index> bins;
  const double df = 1.0 / (static_cast<double>(N) * ts);
  for (Index j = 1; j <= N / 2 && static_cast<Index>(bins.size()) < n_freq; ++j) {
    const double f = j * df;
    if (f >= band_lo - 1e-12 && f <= band_hi + 1e-12) bins.push_back(j);
  }
  if (static_cast<Index>(bins.size()) < n_freq) {
    throw ConfigError("multisine: only " + std::to_string(bins.size()) + " bins of the " +
                      std::to_string(N) + "-sample grid lie in the band, " + std::to_string(n_freq) +
                      " requested");
  }
  Vector u = Vector::Zero(N);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Index j : bins) {
    const double phase = rng.uniform(0.0, two_pi);
    for (Index k = 0; k < N; ++k) {
      // j k reduced mod N keeps the argument small and the period exact
      const Index m = (j * k) % N;
      u(k) += std::cos(two_pi * static_cast<double>(m) / static_cast<double>(N) + phase);
    }
  }
  const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(N));
  if (rms > 0.0) u *= target_rms / rms;
  return u;
}

NoisyOutput add_noise(const Matrix& y, double snr_db, RngStream& rng) {
  NoisyOutput out{y, Matrix::Zero(y.rows(), y.cols())};
  const double factor = std::pow(10.0, -snr_db / 20.0);
  for (Index i = 0; i < y.rows(); ++i) {
    const double rms = std::sqrt(y.row(i).squaredNorm() / static_cast<double>(std::max<Index>(1, y.cols())));
    const double sigma = rms * factor;
    for (Index k = 0; k < y.cols(); ++k) out.e(i, k) = sigma * rng.normal();
  }
  out.y += out.e;
  return out;
}

IoDataset make_record(const MsdParams& system, const SimConfig& cfg, Index length, RngStream& input_rng,
                      RngStream& noise_rng) {
  cfg.validate();
  const Index period = cfg.period();
  const Vector one_period =
      multisine(period, cfg.n_freq, cfg.band_lo, cfg.band_hi, cfg.ts, input_rng, cfg.input_rms);
  const Index total = cfg.transient_discard + length;
  Matrix u(1, total);
  for (Index k = 0; k < total; ++k) u(0, k) = one_period(k % period);

  const Trajectory clean = simulate_system(system, u, cfg);
  IoDataset data;
  data.ts = cfg.ts;
  data.u = u.rightCols(length);
  const Matrix y_clean = clean.y.rightCols(length);
  auto noisy = add_noise(y_clean, cfg.snr_db, noise_rng);
  data.y = std::move(noisy.y);
  data.x_true = clean.x.rightCols(length);
  data.e_true = std::move(noisy.e);
  return data;
}

DatasetSplits make_datasets(const MsdParams& system, const SimConfig& cfg) {
  RngStream est_in(cfg.seed, 1), val_in(cfg.seed, 2), test_in(cfg.seed, 3);
  RngStream est_noise(cfg.seed, 11), val_noise(cfg.seed, 12), test_noise(cfg.seed, 13);
  return DatasetSplits{make_record(system, cfg, cfg.n_est, est_in, est_noise),
                       make_record(system, cfg, cfg.n_val, val_in, val_noise),
                       make_record(system, cfg, cfg.n_test, test_in, test_noise)};
}

}  // namespace encinit
