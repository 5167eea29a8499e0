#include <doctest.h>

#include "encinit/msd.hpp"
#include "oracles.hpp"

using namespace encinit;

namespace {

using V4 = Eigen::Vector4d;

// Global error of the RK4-simulated linear MSD against the exact ZOH discretisation.
double linear_rk4_error(double ti) {
  MsdParams lin = MsdParams::system();
  lin.d1 = 0.0;
  lin.a2 = 0.0;
  SimConfig cfg;
  cfg.ti = ti;
  RngStream rng(4, 0);
  const Matrix u = rng.normal_matrix(1, 200);
  const auto traj = simulate_system(lin, u, cfg);
  const auto [Ac, Bc] = msd_linear_ode(lin);
  const auto [Ad, Bd] = oracle::zoh_exact(Ac, Bc, cfg.ts);
  Vector x = Vector::Zero(4);
  double err = 0.0;
  for (Index k = 0; k < u.cols(); ++k) {
    err = std::max(err, (traj.x.col(k) - x).norm());
    x = Ad * x + Bd * u.col(k);
  }
  return err;
}

}  // namespace

TEST_SUITE("msd") {

TEST_CASE("derivative examples") {
  const auto p = MsdParams::system();
  CHECK(msd_derivative(V4::Zero(), 0.0, p).isZero(0.0));
  const V4 push = msd_derivative(V4::Zero(), 1.0, p);
  CHECK(push(0) == 0.0);
  CHECK(push(1) == 2.0);
  CHECK(push(2) == 0.0);
  CHECK(push(3) == 0.0);
  RngStream rng(1, 0);
  for (int t = 0; t < 100; ++t) {
    const V4 x = rng.normal_matrix(4, 1);
    const double u = rng.normal();
    CHECK((msd_derivative(-x, -u, p) + msd_derivative(x, u, p)).norm() <= 1e-12);
  }
}

TEST_CASE("analytic Jacobian of the ODE matches finite differences") {
  const auto p = MsdParams::system();
  RngStream rng(2, 0);
  for (int t = 0; t < 10; ++t) {
    const V4 x = 0.3 * V4(rng.normal_matrix(4, 1));
    const Matrix fd =
        central_jacobian([&](const Vector& s) { return Vector(msd_derivative(V4(s), 0.2, p)); }, Vector(x));
    CHECK((Matrix(msd_jacobian(x, p)) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("RK4 step examples") {
  auto still = [](const Vector&, double) { return Vector::Zero(3); };
  const Vector x = Vector::LinSpaced(3, 1.0, 3.0);
  CHECK(rk4_step(still, x, 0.0, 0.1) == x);

  auto oscillator = [](const Vector& s, double) {
    Vector d(2);
    d << s(1), -s(0);
    return d;
  };
  const Vector start = (Vector(2) << 1.0, 0.0).finished();
  const Vector next = rk4_step(oscillator, start, 0.0, 0.1);
  CHECK(std::abs(next(0) - std::cos(0.1)) <= 1e-7);
  CHECK(std::abs(next(1) + std::sin(0.1)) <= 1e-7);
  CHECK(next(0) == doctest::Approx(0.995004).epsilon(1e-6));
  CHECK(next(1) == doctest::Approx(-0.099833).epsilon(1e-5));

  RngStream rng(3, 0);
  const Matrix A = rng.normal_matrix(3, 3);
  const Matrix B = rng.normal_matrix(3, 1);
  auto linear = [&](const Vector& s, double u) { return Vector(A * s + B * u); };
  const Vector x0 = rng.normal_matrix(3, 1);
  const auto [Ad, Bd] = oracle::rk4_linear_step(A, B, 0.05);
  CHECK((rk4_step(linear, x0, 0.7, 0.05) - (Ad * x0 + Bd * 0.7)).norm() < 1e-14);

  auto blowup = [](const Vector& s, double) { return Vector(s.array() * 1e300); };
  CHECK_THROWS_AS(rk4_step(blowup, x, 0.0, 1e10), DivergenceError);
}

TEST_CASE("one sample of the MSD matches the frozen reference") {
  // reference values from an independent RK4 implementation (10 substeps of 0.01 s)
  const V4 x0(0.05, -0.3, 0.12, 0.4);
  const MsdBaseline system(MsdParams::system());
  const MsdBaseline baseline(MsdParams::baseline());
  const V4 s = system.step(x0, 0.8);
  const V4 b = baseline.step(x0, 0.8);
  const V4 s_ref(0.051568738259316065, 0.07807272809298366, 0.06841035178718369, -1.119381153517541);
  const V4 b_ref(0.051567785995045856, 0.07808734904392843, 0.06840960163689172, -1.1193969953705025);
  CHECK((s - s_ref).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((b - b_ref).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("simulate_system basics") {
  const auto p = MsdParams::system();
  const SimConfig cfg;
  CHECK(cfg.substeps() == 10);
  const auto rest = simulate_system(p, Matrix::Zero(1, 50), cfg);
  CHECK(rest.y.isZero(0.0));
  CHECK(rest.x.isZero(0.0));

  const auto free = simulate_system(p, Matrix::Zero(1, 300), cfg, Vector(V4(0.05, 0.2, -0.03, 0.1)));
  double prev = msd_energy(V4(free.x.col(0)), p);
  for (Index k = 1; k < 300; ++k) {
    const double e = msd_energy(V4(free.x.col(k)), p);
    CHECK(e < prev);
    prev = e;
  }
  CHECK(free.y.row(0) == free.x.row(2));
}

TEST_CASE("linear MSD matches the RK4 polynomial discretisation") {
  MsdParams p = MsdParams::system();
  p.d1 = 0.0;
  p.a2 = 0.0;
  const SimConfig cfg;
  const Matrix u = RngStream(5, 0).normal_matrix(1, 300);
  const auto traj = simulate_system(p, u, cfg);
  const auto [Ac, Bc] = msd_linear_ode(p);
  const auto [Phi, Gam] = oracle::rk4_linear_sample(Ac, Bc, cfg.ti, 10);
  Vector x = Vector::Zero(4);
  for (Index k = 0; k < 300; ++k) {
    CHECK((traj.x.col(k) - x).norm() <= 1e-9);
    x = Phi * x + Gam * u.col(k);
  }
}

TEST_CASE("RK4 global error drops about 16x when ti is halved") {
  const double ratio = linear_rk4_error(0.01) / linear_rk4_error(0.005);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("small inputs deviate from the linear model by O(amplitude^3)") {
  const auto p = MsdParams::system();
  MsdParams lin = p;
  lin.d1 = 0.0;
  lin.a2 = 0.0;
  const SimConfig cfg;
  const Matrix shape = RngStream(6, 0).normal_matrix(1, 300);
  auto deviation = [&](double a) {
    return (simulate_system(p, a * shape, cfg).y - simulate_system(lin, a * shape, cfg).y).cwiseAbs().maxCoeff();
  };
  const double ratio = deviation(0.02) / deviation(0.01);
  CHECK(ratio >= 7.0);
  CHECK(ratio <= 9.0);
}

TEST_CASE("multisine construction") {
  const Index N = 400;
  RngStream rng(7, 0);
  const Vector u = multisine(N, 25, 0.0, 5.0, 0.1, rng, 1.7);
  CHECK(std::sqrt(u.squaredNorm() / N) == doctest::Approx(1.7).epsilon(1e-12));
  const auto mag = oracle::dft_magnitude(u);
  const double peak = *std::max_element(mag.begin(), mag.end());
  for (Index j = 0; j <= N / 2; ++j) {
    const bool selected = j >= 1 && j <= 25;
    if (!selected) CHECK(mag[static_cast<std::size_t>(j)] <= 1e-9 * peak);
    else CHECK(mag[static_cast<std::size_t>(j)] > 1e-3 * peak);
  }

  RngStream one(8, 0);
  const Vector c = multisine(64, 1, 0.0, 5.0, 0.1, one, 1.0);
  for (Index k = 0; k < 48; ++k) {
    // a single cosine at bin 1: quadrature samples a quarter period apart sum to 2 rms^2
    CHECK(c(k) * c(k) + c(k + 16) * c(k + 16) == doctest::Approx(2.0).epsilon(1e-12));
  }

  RngStream r(9, 0);
  CHECK_THROWS_AS(multisine(100, 10, 0.0, 6.0, 0.1, r, 1.0), ConfigError);
  CHECK_THROWS_AS(multisine(100, 60, 0.0, 5.0, 0.1, r, 1.0), ConfigError);

  RngStream s1(10, 0), s2(10, 0);
  CHECK(multisine(128, 20, 0.0, 5.0, 0.1, s1, 1.0) == multisine(128, 20, 0.0, 5.0, 0.1, s2, 1.0));
}

TEST_CASE("default period places every component inside the band") {
  SimConfig cfg;
  CHECK(cfg.period() == 3332);
  RngStream rng(11, 0);
  const Vector u = multisine(cfg.period(), cfg.n_freq, cfg.band_lo, cfg.band_hi, cfg.ts, rng, 1.0);
  CHECK(u.size() == 3332);
  const double top = static_cast<double>(cfg.n_freq) / (static_cast<double>(cfg.period()) * cfg.ts);
  CHECK(top <= cfg.band_hi);
  CHECK(top > 0.99 * cfg.band_hi);
}

TEST_CASE("noise injection") {
  RngStream rng(12, 0);
  const Matrix y = rng.normal_matrix(1, 100000) * 3.0;
  const double rms = std::sqrt(y.squaredNorm() / 100000.0);
  RngStream nr(12, 1);
  const auto noisy = add_noise(y, 20.0, nr);
  CHECK((noisy.y - y - noisy.e).cwiseAbs().maxCoeff() <= 1e-12);
  const double e_rms = std::sqrt(noisy.e.squaredNorm() / 100000.0);
  CHECK(e_rms / rms == doctest::Approx(0.1).epsilon(0.02));
  const double snr = 10.0 * std::log10(y.squaredNorm() / noisy.e.squaredNorm());
  CHECK(std::abs(snr - 20.0) <= 0.2);

  RngStream quiet(12, 2);
  const auto faint = add_noise(y, 300.0, quiet);
  CHECK(faint.e.norm() / y.norm() <= 1e-14);
}

TEST_CASE("dataset assembly") {
  SimConfig cfg;
  const auto sys = MsdParams::system();
  const auto a = make_datasets(sys, cfg);
  CHECK(a.est.size() == 20000);
  CHECK(a.val.size() == 10000);
  CHECK(a.test.size() == 10000);
  CHECK(a.est.x_true.has_value());
  CHECK(a.est.e_true.has_value());
  CHECK((a.est.y - a.est.x_true->row(2) - *a.est.e_true).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.est.ts == cfg.ts);
  const auto b = make_datasets(sys, cfg);
  CHECK(a.est.u == b.est.u);
  CHECK(a.test.y == b.test.y);
  CHECK(a.est.u.leftCols(1000) != a.val.u.leftCols(1000));
  CHECK(a.val.u.leftCols(1000) != a.test.u.leftCols(1000));
  CHECK(a.est.u.leftCols(1000) != a.test.u.leftCols(1000));
  cfg.seed = 2;
  CHECK(make_datasets(sys, cfg).est.u != a.est.u);
}

TEST_CASE("configuration validation") {
  SimConfig cfg;
  cfg.ti = 0.03;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SimConfig{};
  cfg.band_hi = 6.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  MsdParams p;
  p.m1 = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = MsdParams{};
  p.c2 = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(MsdParams::baseline().d1 == 0.05);
  CHECK(MsdParams::system().d1 == 0.1);
}

TEST_CASE("baseline adjoint is the transposed step Jacobian") {
  const MsdBaseline base(MsdParams::baseline());
  RngStream rng(13, 0);
  for (int t = 0; t < 10; ++t) {
    const Vector x = 0.2 * rng.normal_matrix(4, 1);
    const Vector u = rng.normal_matrix(1, 1);
    const Vector w = rng.normal_matrix(4, 1);
    const Matrix J = central_jacobian([&](const Vector& s) { return base.f(s, u); }, x);
    CHECK(oracle::rel_err(base.f_adjoint(x, u, w), J.transpose() * w) < 1e-7);
  }
  const Vector w1 = Vector::Constant(1, 2.5);
  const Vector g = base.h_adjoint(Vector::Zero(4), Vector::Zero(1), w1);
  CHECK(g(2) == 2.5);
  CHECK(g(0) == 0.0);
}

}  // TEST_SUITE
