#include <doctest.h>

#include "encinit/linearize.hpp"
#include "encinit/msd.hpp"
#include "oracles.hpp"

using namespace encinit;

namespace {

// Smooth two-state model with a nonzero equilibrium at u* = 0.
FunctionBaseline offset_model() {
  return FunctionBaseline(
      2, 1, 1,
      [](const Vector& x, const Vector& u) {
        Vector n(2);
        n(0) = 0.6 * x(0) + 0.1 * std::sin(x(1)) + 0.5 * u(0) + 0.3;
        n(1) = 0.2 * x(0) + 0.5 * x(1) - 0.05 * x(0) * x(0) + 0.1;
        return n;
      },
      [](const Vector& x, const Vector& u) { return Vector::Constant(1, x(1) + 0.2 * x(0) * x(0) + 0.1 * u(0)); });
}

// Linear dynamics plus a quadratic term: the linearisation residual is exactly quadratic.
FunctionBaseline quadratic_model() {
  return FunctionBaseline(
      2, 1, 1,
      [](const Vector& x, const Vector& u) {
        Vector n(2);
        n(0) = 0.7 * x(0) + 0.2 * x(1) + 0.4 * x(1) * x(1) + u(0);
        n(1) = -0.1 * x(0) + 0.6 * x(1);
        return n;
      },
      [](const Vector& x, const Vector&) { return Vector::Constant(1, x(0)); });
}

double linearisation_residual(const NonlinearBaseline& m, const LinearizedModel& lin, const Vector& delta) {
  const Vector x = lin.eq.x_star + delta;
  return (m.f(x, lin.eq.u_star) - lin.eq.x_star - lin.lti.A * delta).norm();
}

}  // namespace

TEST_SUITE("linearize") {

TEST_CASE("MSD baseline equilibrium at rest is the origin") {
  const MsdBaseline msd(MsdParams::baseline());
  const auto eq = find_equilibrium(msd, Vector::Zero(1), Vector::Zero(4));
  CHECK(eq.x_star.norm() == 0.0);
  CHECK(eq.y_star.norm() == 0.0);
}

TEST_CASE("linear model equilibria") {
  LtiSS ss{Matrix(2, 2), Matrix(2, 1), Matrix(1, 2), Matrix::Zero(1, 1)};
  ss.A << 0.5, 0.1, -0.2, 0.7;
  ss.B << 1.0, 0.5;
  ss.C << 1.0, 0.0;
  const LtiBaseline lti(ss);
  CHECK(find_equilibrium(lti, Vector::Zero(1), Vector::Constant(2, 3.0)).x_star.norm() < 1e-10);
  const Vector u = Vector::Constant(1, 2.0);
  const Vector expected = (Matrix::Identity(2, 2) - ss.A).inverse() * ss.B * u;
  const auto eq = find_equilibrium(lti, u, Vector::Zero(2));
  CHECK((eq.x_star - expected).norm() < 1e-10);
  CHECK((eq.y_star - ss.C * expected).norm() < 1e-10);
}

TEST_CASE("a map without a fixed point fails to converge") {
  FunctionBaseline shift(
      1, 1, 1, [](const Vector& x, const Vector&) { return Vector(x.array() + 1.0); },
      [](const Vector& x, const Vector&) { return x; });
  CHECK_THROWS_AS(find_equilibrium(shift, Vector::Zero(1), Vector::Zero(1)), ConvergenceError);
  try {
    find_equilibrium(shift, Vector::Zero(1), Vector::Zero(1));
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() == doctest::Approx(1.0));
  }
}

TEST_CASE("nonlinear equilibrium satisfies its fixed-point invariant") {
  const auto m = offset_model();
  const auto eq = find_equilibrium(m, Vector::Zero(1), Vector::Zero(2));
  CHECK((m.f(eq.x_star, eq.u_star) - eq.x_star).norm() <= 1e-10);
  CHECK((m.h(eq.x_star, eq.u_star) - eq.y_star).norm() == 0.0);
  CHECK(eq.x_star.norm() > 0.1);
}

TEST_CASE("jacobians of an exactly linear model") {
  std::mt19937_64 gen(1);
  const auto ss = oracle::random_stable(gen, 4, 2, 3, 0.9, true);
  const LtiBaseline lti(ss);
  const auto lin = jacobians(lti, find_equilibrium(lti, Vector::Zero(2), Vector::Zero(4)));
  CHECK((lin.lti.A - ss.A).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((lin.lti.B - ss.B).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((lin.lti.C - ss.C).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((lin.lti.D - ss.D).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("MSD linearisation equals the RK4 map of the linear ODE") {
  const auto p = MsdParams::baseline();
  const MsdBaseline msd(p);
  const auto lin = jacobians(msd, find_equilibrium(msd, Vector::Zero(1), Vector::Zero(4)));
  // linear part of the ODE written out from the equations of motion
  Matrix Ac = Matrix::Zero(4, 4);
  Ac(0, 1) = 1.0;
  Ac(1, 0) = -(p.k1 + p.k2) / p.m1;
  Ac(1, 1) = -(p.c1 + p.c2) / p.m1;
  Ac(1, 2) = p.k2 / p.m1;
  Ac(1, 3) = p.c2 / p.m1;
  Ac(2, 3) = 1.0;
  Ac(3, 0) = p.k2 / p.m2;
  Ac(3, 1) = p.c2 / p.m2;
  Ac(3, 2) = -p.k2 / p.m2;
  Ac(3, 3) = -p.c2 / p.m2;
  Matrix Bc = Matrix::Zero(4, 1);
  Bc(1, 0) = 1.0 / p.m1;
  const auto [Phi, Gam] = oracle::rk4_linear_sample(Ac, Bc, 0.01, 10);
  CHECK((lin.lti.A - Phi).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((lin.lti.B - Gam).cwiseAbs().maxCoeff() <= 1e-8);
  Matrix C = Matrix::Zero(1, 4);
  C(0, 2) = 1.0;
  CHECK((lin.lti.C - C).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(lin.lti.D.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("cubic map has zero slope at the origin") {
  FunctionBaseline cubic(
      1, 1, 1, [](const Vector& x, const Vector&) { return Vector(x.array().cube()); },
      [](const Vector& x, const Vector&) { return x; });
  const auto lin = jacobians(cubic, find_equilibrium(cubic, Vector::Zero(1), Vector::Zero(1)));
  CHECK(std::abs(lin.lti.A(0, 0)) < 1e-10);
}

TEST_CASE("linearisation at the origin: zero bias and plain maps") {
  const MsdBaseline msd(MsdParams::baseline());
  const auto eq = find_equilibrium(msd, Vector::Zero(1), Vector::Zero(4));
  const auto lm = init_from_linearization(msd, eq, 6);
  CHECK(lm.bias.isZero(0.0));
  const auto plain = noiseless_maps(lm.model.lti, 6);
  CHECK(lm.maps.W_y == plain.W_y);
  CHECK(lm.maps.W_u == plain.W_u);
}

TEST_CASE("constant equilibrium trajectory reconstructs x* exactly") {
  const auto m = offset_model();
  const auto eq = find_equilibrium(m, Vector::Zero(1), Vector::Zero(2));
  const auto lm = init_from_linearization(m, eq, 3);
  CHECK(lm.bias.isApprox(eq.x_star));
  IoDataset d;
  d.u = Matrix::Zero(1, 10);
  d.y = eq.y_star.replicate(1, 10);
  const Vector x = reconstruct_around(lm, make_window(d, 6, 3));
  CHECK((x - eq.x_star).norm() <= 1e-9);
}

TEST_CASE("linearisation residual is quadratic in the deviation") {
  const auto m = quadratic_model();
  const auto lin = jacobians(m, find_equilibrium(m, Vector::Zero(1), Vector::Zero(2)));
  RngStream rng(3, 3);
  for (int t = 0; t < 10; ++t) {
    const Vector dir = rng.normal_matrix(2, 1).normalized();
    const double big = linearisation_residual(m, lin, 1e-2 * dir);
    const double small = linearisation_residual(m, lin, 0.5e-2 * dir);
    if (std::abs(dir(1)) < 0.05) continue;  // the quadratic term only sees x(1)
    const double ratio = big / small;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("MSD reconstruction error around the origin shrinks with amplitude") {
  const auto p = MsdParams::baseline();
  const MsdBaseline msd(p);
  const auto eq = find_equilibrium(msd, Vector::Zero(1), Vector::Zero(4));
  const Index n = 8;
  const auto lm = init_from_linearization(msd, eq, n);
  RngStream rng(12, 0);
  const Vector shape = multisine(400, 100, 0.0, 5.0, 0.1, rng, 1.0);

  // relative error of the linear maps on the nonlinear system; the odd cubic terms make it O(amplitude^2)
  auto relative_error = [&](double amplitude) {
    const auto traj = simulate(msd, amplitude * shape.transpose(), Vector::Zero(4));
    IoDataset d;
    d.u = amplitude * shape.transpose();
    d.y = traj.y;
    double worst = 0.0, scale = 0.0;
    for (Index k = 200; k < 400; ++k) {
      worst = std::max(worst, (reconstruct_around(lm, make_window(d, k, n)) - traj.x.col(k)).norm());
      scale = std::max(scale, traj.x.col(k).norm());
    }
    CHECK(scale <= 0.1);
    return worst / scale;
  };
  const double ratio = relative_error(0.02) / relative_error(0.01);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

}  // TEST_SUITE
