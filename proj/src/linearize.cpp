#include "encinit/linearize.hpp"

#include <Eigen/QR>

#include <cmath>

namespace encinit {

EquilibriumPoint find_equilibrium(const NonlinearBaseline& model, const Vector& u_star,
                                  const Vector& x_guess, const EquilibriumOptions& opts) {
  if (u_star.size() != model.nu() || x_guess.size() != model.nx()) {
    throw DimensionError("equilibrium guess dimensions do not match the model");
  }
  auto residual = [&](const Vector& x) -> Vector { return model.f(x, u_star) - x; };

  Vector x = x_guess;
  Vector g = residual(x);
  double norm = g.norm();
  for (int it = 0; it < opts.max_iterations && !(norm <= opts.tol); ++it) {
    const Matrix J = central_jacobian(residual, x);
    const Vector step = J.colPivHouseholderQr().solve(-g);
    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      const Vector trial = x + scale * step;
      const Vector g_trial = residual(trial);
      if (g_trial.allFinite() && g_trial.norm() < norm) {
        x = trial;
        g = g_trial;
        norm = g.norm();
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(norm <= opts.tol)) {
    throw ConvergenceError("equilibrium search did not converge", norm);
  }
  return EquilibriumPoint{x, u_star, model.h(x, u_star)};
}

LinearizedModel jacobians(const NonlinearBaseline& model, const EquilibriumPoint& eq) {
  const Vector& xs = eq.x_star;
  const Vector& us = eq.u_star;
  LtiSS ss;
  ss.A = central_jacobian([&](const Vector& x) { return model.f(x, us); }, xs);
  ss.B = central_jacobian([&](const Vector& u) { return model.f(xs, u); }, us);
  ss.C = central_jacobian([&](const Vector& x) { return model.h(x, us); }, xs);
  ss.D = central_jacobian([&](const Vector& u) { return model.h(xs, u); }, us);
  ss.validate();
  return LinearizedModel{std::move(ss), eq};
}

LinearizedMaps init_from_linearization(const NonlinearBaseline& model, const EquilibriumPoint& eq,
                                       Index n, const std::optional<Matrix>& K) {
  LinearizedModel lin = jacobians(model, eq);
  lin.lti.K = K;
  auto maps = K ? noisy_maps(lin.lti, n) : noiseless_maps(lin.lti, n);
  return LinearizedMaps{std::move(maps), eq.x_star, std::move(lin)};
}

Vector reconstruct_around(const LinearizedMaps& lin, const StackedWindow& w) {
  StackedWindow dev = w;
  const auto& eq = lin.model.eq;
  for (Index j = 0; j <= w.n; ++j) {
    dev.y_stack.segment(j * eq.y_star.size(), eq.y_star.size()) -= eq.y_star;
    dev.u_stack.segment(j * eq.u_star.size(), eq.u_star.size()) -= eq.u_star;
  }
  return reconstruct(lin.maps, dev) + lin.bias;
}

}  // namespace encinit
