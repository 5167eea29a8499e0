#pragma once

#include <optional>

#include "encinit/baseline.hpp"
#include "encinit/lti_reconstruct.hpp"

namespace encinit {

struct EquilibriumPoint {
  Vector x_star;
  Vector u_star;
  Vector y_star;
};

struct LinearizedModel {
  LtiSS lti;
  EquilibriumPoint eq;
};

struct EquilibriumOptions {
  double tol = 1e-10;
  int max_iterations = 100;
  int max_halvings = 20;
};

/**
 * Solves f(x, u*) = x by damped Newton with backtracking on the residual norm.
 * The Jacobian of the residual comes from central differences.
 */
EquilibriumPoint find_equilibrium(const NonlinearBaseline& model, const Vector& u_star,
                                  const Vector& x_guess, const EquilibriumOptions& opts = {});

/// Jacobians of f and h w.r.t. state and input at the equilibrium (central differences).
LinearizedModel jacobians(const NonlinearBaseline& model, const EquilibriumPoint& eq);

/**
 * Reconstructability maps of the linearisation, acting on deviation windows
 * (y - y*, u - u*). The returned bias is x*, so that the state estimate is
 * maps(window - offsets) + bias.
 */
struct LinearizedMaps {
  ReconstructabilityMaps maps;
  Vector bias;
  LinearizedModel model;
};
LinearizedMaps init_from_linearization(const NonlinearBaseline& model, const EquilibriumPoint& eq,
                                       Index n, const std::optional<Matrix>& K = std::nullopt);

/// Evaluates linearized maps on a raw window: maps(window - offsets) + x*.
Vector reconstruct_around(const LinearizedMaps& lin, const StackedWindow& w);

}  // namespace encinit
