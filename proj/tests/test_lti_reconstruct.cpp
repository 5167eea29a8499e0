#include <doctest.h>

#include <sstream>

#include "encinit/lti_reconstruct.hpp"
#include "oracles.hpp"

using namespace encinit;

namespace {

LtiSS scalar_system() {
  return LtiSS{Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

IoDataset run_to_dataset(const oracle::LtiRun& run, const Matrix& u) {
  IoDataset d;
  d.u = u;
  d.y = run.y;
  d.x_true = run.x;
  d.e_true = run.e;
  return d;
}

Matrix oracle_pinv(const Matrix& M) { return M.completeOrthogonalDecomposition().pseudoInverse(); }

}  // namespace

TEST_SUITE("lti_reconstruct") {

TEST_CASE("stacked operators of the scalar example") {
  auto ops = build_stacked(scalar_system(), 1);
  CHECK(ops.observability.isApprox(mat({{0.5}, {1.0}})));
  CHECK(ops.toeplitz.isApprox(mat({{0.0, 1.0}, {0.0, 0.0}})));
  CHECK(ops.state_input.isApprox(mat({{0.0, 1.0}})));
  CHECK_FALSE(ops.output_feedback.has_value());

  auto with_k = scalar_system();
  with_k.K = Matrix::Zero(1, 1);
  ops = build_stacked(with_k, 1);
  CHECK(ops.transition_power(0, 0) == 0.5);
  REQUIRE(ops.output_feedback.has_value());
  CHECK(ops.output_feedback->isZero(0.0));
  CHECK(ops.state_output->isZero(0.0));
  CHECK(ops.state_output->cols() == 2);
}

TEST_CASE("stacked operator structure on random systems") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto ss = oracle::random_stable(gen, 2 + trial % 3, 1 + trial % 2, 1 + (trial / 2) % 2, 0.9, true);
    ss.K = RngStream(trial, 3).normal_matrix(ss.nx(), ss.ny()) * 0.1;
    const Index n = 3;
    const Index ny = ss.ny(), nu = ss.nu();
    const auto ops = build_stacked(ss, n);
    const Matrix At = ss.A - *ss.K * ss.C;
    CHECK((ops.transition_power - oracle::mat_pow(At, n)).norm() < 1e-12);
    for (Index i = 0; i <= n; ++i) {
      CHECK((ops.observability.middleRows(i * ny, ny) - ss.C * oracle::mat_pow(At, n - i)).norm() < 1e-12);
      for (Index j = 0; j <= n; ++j) {
        const Matrix T = ops.toeplitz.block(i * ny, j * nu, ny, nu);
        const Matrix L = ops.output_feedback->block(i * ny, j * ny, ny, ny);
        if (j < i) CHECK(T.isZero(0.0));
        if (j == i) CHECK(T == ss.D);
        if (j <= i) CHECK(L.isZero(0.0));
      }
    }
    CHECK(ops.state_input.leftCols(nu).isZero(0.0));
    CHECK(ops.state_output->leftCols(ny).isZero(0.0));
  }
}

TEST_CASE("observability blocks of a two-state system, n = 3") {
  LtiSS ss{mat({{0.9, 0.2}, {-0.1, 0.7}}), mat({{1.0}, {0.5}}), mat({{1.0, -1.0}}), Matrix::Zero(1, 1)};
  const auto ops = build_stacked(ss, 3);
  for (Index j = 0; j <= 3; ++j) {
    Matrix expected = ss.C;
    for (Index p = 0; p < 3 - j; ++p) expected = expected * ss.A;
    CHECK((ops.observability.row(j) - expected).norm() < 1e-14);
  }
}

TEST_CASE("left inverse") {
  const Matrix inv = left_inverse(mat({{0.5}, {1.0}}));
  CHECK(inv(0, 0) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(inv(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(left_inverse(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3), 1e-14));
  CHECK_THROWS_AS(left_inverse(Matrix::Zero(2, 1)), UnobservableError);
  try {
    left_inverse(mat({{1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}}));
    FAIL("expected an unobservable error");
  } catch (const UnobservableError& e) {
    CHECK(e.rank() == 1);
  }
  RngStream rng(4, 4);
  for (int t = 0; t < 20; ++t) {
    const Matrix O = rng.normal_matrix(8, 4);
    CHECK((left_inverse(O) * O - Matrix::Identity(4, 4)).norm() < 1e-10);
  }
}

TEST_CASE("noiseless maps of the scalar example") {
  const auto maps = noiseless_maps(scalar_system(), 1);
  CHECK(maps.W_y(0, 0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(maps.W_y(0, 1) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(std::abs(maps.W_u(0, 0)) < 1e-15);
  CHECK(maps.W_u(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(maps.warnings.empty());

  // trajectory oracle
  const Matrix u = RngStream(1, 2).normal_matrix(1, 20);
  const auto run = oracle::simulate_lti(scalar_system(), u, Vector::Constant(1, 0.7));
  const auto d = run_to_dataset(run, u);
  for (Index k = 1; k < 20; ++k) {
    CHECK(reconstruct(maps, make_window(d, k, 1))(0) == doctest::Approx(run.x(0, k)).epsilon(1e-12));
  }
}

TEST_CASE("dead-beat and fully measured special cases") {
  LtiSS deadbeat{Matrix::Zero(1, 1), Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
  const auto m = noiseless_maps(deadbeat, 1);
  CHECK(m.W_y.isZero(0.0));
  CHECK(m.W_u(0, 0) == 0.0);
  CHECK(m.W_u(0, 1) == 2.0);

  LtiSS measured{mat({{0.3, 0.1}, {0.0, 0.2}}), mat({{1.0}, {0.0}}), Matrix::Identity(2, 2), Matrix::Zero(2, 1)};
  const auto full = noiseless_maps(measured, 0);
  CHECK(full.W_y.isApprox(Matrix::Identity(2, 2), 1e-14));
  CHECK(full.W_u.isZero(1e-15));

  measured.K = mat({{0.4, -0.3}, {0.2, 0.9}});
  const auto noisy = noisy_maps(measured, 0);
  CHECK(noisy.W_y.isApprox(Matrix::Identity(2, 2), 1e-14));
  CHECK(noisy.W_u.isZero(1e-15));
}

TEST_CASE("unstable transition matrix yields a warning") {
  LtiSS ss{Matrix::Constant(1, 1, 1.5), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
  const auto maps = noiseless_maps(ss, 2);
  REQUIRE(maps.warnings.size() == 1);
  CHECK(maps.warnings[0].find("spectral radius") != std::string::npos);
}

TEST_CASE("noisy maps with K = 0 reduce to the noiseless maps") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto ss = oracle::random_stable(gen, 3, 2, 2, 0.85, true);
    const auto plain = noiseless_maps(ss, 4);
    ss.K = Matrix::Zero(3, 2);
    const auto noisy = noisy_maps(ss, 4);
    CHECK((plain.W_y - noisy.W_y).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((plain.W_u - noisy.W_u).cwiseAbs().maxCoeff() <= 1e-12);
  }
  LtiSS no_k = scalar_system();
  CHECK_THROWS_AS(noisy_maps(no_k, 1), DimensionError);
}

TEST_CASE("noisy scalar example satisfies the error identity") {
  auto ss = scalar_system();
  ss.K = Matrix::Constant(1, 1, 0.3);
  const Index n = 2;
  const auto maps = noisy_maps(ss, n);
  const Matrix u = RngStream(8, 0).normal_matrix(1, 30);
  const Matrix e = RngStream(8, 1).normal_matrix(1, 30) * 0.2;
  const auto run = oracle::simulate_lti(ss, u, Vector::Constant(1, -0.4), &e);
  const auto d = run_to_dataset(run, u);

  // oracle gain: (A - K C)^n times the pseudo-inverse of the predictor observability matrix
  const double at = 0.5 - 0.3;
  Matrix Ot(3, 1);
  Ot << at * at, at, 1.0;
  const Matrix gain = std::pow(at, 2) * oracle_pinv(Ot);
  CHECK((noise_error_gain(ss, n) - gain).norm() < 1e-14);
  for (Index k = n; k < 30; ++k) {
    const auto w = make_window(d, k, n);
    const double err = reconstruct(maps, w)(0) - run.x(0, k);
    Vector e_stack(3);
    e_stack << e(0, k), e(0, k - 1), e(0, k - 2);
    CHECK(err == doctest::Approx((gain * e_stack)(0)).epsilon(1e-10));
  }
}

TEST_CASE("reconstruct checks dimensions and is linear") {
  const auto maps = noiseless_maps(scalar_system(), 1);
  StackedWindow zero{Vector::Zero(2), Vector::Zero(2), 1};
  CHECK(reconstruct(maps, zero).isZero(0.0));
  StackedWindow wrong{Vector::Zero(3), Vector::Zero(3), 2};
  CHECK_THROWS_AS(reconstruct(maps, wrong), DimensionError);
}

TEST_CASE("shift to the past window") {
  const auto ss = scalar_system();
  const auto shifted = shift_to_past_window(noiseless_maps(ss, 1), ss);
  CHECK(shifted.lag == 1);
  const Matrix u = RngStream(2, 2).normal_matrix(1, 25);
  const auto run = oracle::simulate_lti(ss, u, Vector::Constant(1, 1.3));
  const auto d = run_to_dataset(run, u);
  for (Index k = 2; k < 25; ++k) {
    const double est = reconstruct(shifted, make_window(d, k - 1, 1))(0);
    CHECK(est == doctest::Approx(run.x(0, k)).epsilon(1e-12));
  }

  LtiSS hold{Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Identity(2, 2), Matrix::Zero(2, 1)};
  const auto held = shift_to_past_window(noiseless_maps(hold, 0), hold);
  CHECK(held.W_y.isApprox(Matrix::Identity(2, 2)));

  std::mt19937_64 gen(17);
  auto sys = oracle::random_stable(gen, 3, 1, 2, 0.8, true);
  const auto a = shift_to_past_window(noiseless_maps(sys, 3), sys);
  sys.K = Matrix::Zero(3, 2);
  const auto b = shift_to_past_window(noisy_maps(sys, 3), sys);
  CHECK((a.W_y - b.W_y).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.W_u - b.W_u).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shifted noisy maps keep the error identity one step later") {
  std::mt19937_64 gen(29);
  auto ss = oracle::random_stable(gen, 3, 1, 1, 0.8, false);
  ss.K = RngStream(1, 9).normal_matrix(3, 1) * 0.2;
  const Index n = 4;
  const auto shifted = shift_to_past_window(noisy_maps(ss, n), ss);
  const Matrix gain = (ss.A - *ss.K * ss.C) * noise_error_gain(ss, n);
  const Matrix u = RngStream(1, 10).normal_matrix(1, 60);
  const Matrix e = RngStream(1, 11).normal_matrix(1, 60) * 0.1;
  const auto run = oracle::simulate_lti(ss, u, Vector::Zero(3), &e);
  const auto d = run_to_dataset(run, u);
  for (Index k = n + 1; k < 60; ++k) {
    const Vector err = reconstruct(shifted, make_window(d, k - 1, n)) - run.x.col(k);
    const Vector predicted = gain * stack_descending(e, k - 1, n + 1);
    CHECK(oracle::rel_err(err, predicted) < 1e-8);
  }
}

TEST_CASE("exact reconstruction property over random observable systems") {
  std::mt19937_64 gen(101);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index nx = 1 + trial % 6;
    auto ss = oracle::random_stable(gen, nx, 1 + trial % 2, 1 + trial % 3 / 2, 0.95, trial % 2 == 0);
    if (oracle::svd_rank(observability_matrix(ss.A, ss.C, nx)) < nx) continue;
    const Index n = nx + trial % (nx + 1);
    const auto maps = noiseless_maps(ss, n);
    const Matrix u = RngStream(trial, 0).normal_matrix(ss.nu(), n + 30);
    const Vector x0 = RngStream(trial, 1).normal_matrix(nx, 1);
    const auto run = oracle::simulate_lti(ss, u, x0);
    const auto d = run_to_dataset(run, u);
    for (Index k = n; k < u.cols(); ++k) {
      CHECK(oracle::rel_err(reconstruct(maps, make_window(d, k, n)), run.x.col(k)) <= 1e-8);
    }
    ++checked;
  }
  CHECK(checked >= 90);
}

TEST_CASE("noisy error identity over random innovation-form systems") {
  std::mt19937_64 gen(202);
  for (int trial = 0; trial < 50; ++trial) {
    const Index nx = 1 + trial % 4;
    auto ss = oracle::random_stable(gen, nx, 1, 1 + trial % 2, 0.9, trial % 3 == 0);
    ss.K = RngStream(trial, 5).normal_matrix(nx, ss.ny()) * 0.3;
    const Matrix At = ss.A - *ss.K * ss.C;
    const Index n = nx + trial % 3;
    Matrix Ot(ss.ny() * (n + 1), nx);
    for (Index j = 0; j <= n; ++j) Ot.middleRows(j * ss.ny(), ss.ny()) = ss.C * oracle::mat_pow(At, n - j);
    if (oracle::svd_rank(Ot) < nx) continue;
    const Matrix gain = oracle::mat_pow(At, n) * oracle_pinv(Ot);
    const auto maps = noisy_maps(ss, n);
    const Matrix u = RngStream(trial, 6).normal_matrix(1, n + 25);
    const Matrix e = RngStream(trial, 7).normal_matrix(ss.ny(), n + 25) * 0.1;
    const auto run = oracle::simulate_lti(ss, u, RngStream(trial, 8).normal_matrix(nx, 1), &e);
    const auto d = run_to_dataset(run, u);
    for (Index k = n; k < u.cols(); ++k) {
      const Vector err = reconstruct(maps, make_window(d, k, n)) - run.x.col(k);
      CHECK(oracle::rel_err(err, gain * stack_descending(e, k, n + 1)) <= 1e-8);
    }
  }
}

TEST_CASE("noise error gain norm does not grow with the window beyond n_x") {
  std::mt19937_64 gen(303);
  int sampled = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Index nx = 2 + trial % 3;
    auto ss = oracle::random_stable(gen, nx, 1, 1, 0.9, false);
    ss.K = Matrix::Zero(nx, 1);  // A_tilde = A, stable
    if (observability_rank(ss, nx) < nx) continue;
    double prev = std::numeric_limits<double>::infinity();
    for (Index n = nx; n <= 3 * nx; ++n) {
      const Matrix G = noise_error_gain(ss, n);
      const double norm = Eigen::JacobiSVD<Matrix>(G).singularValues()(0);
      CHECK(norm <= prev * (1.0 + 1e-9));
      prev = norm;
    }
    ++sampled;
  }
  CHECK(sampled > 30);
}

TEST_CASE("maps CSV round trip") {
  std::mt19937_64 gen(404);
  auto ss = oracle::random_stable(gen, 3, 2, 1, 0.7, true);
  ss.K = Matrix::Constant(3, 1, 0.1);
  const auto maps = shift_to_past_window(noisy_maps(ss, 3), ss);
  std::stringstream s;
  write_maps_csv(maps, s);
  const auto back = read_maps_csv(s);
  CHECK(back.W_y == maps.W_y);
  CHECK(back.W_u == maps.W_u);
  CHECK(back.n == 3);
  CHECK(back.noisy);
  CHECK(back.lag == 1);
}

}  // TEST_SUITE
