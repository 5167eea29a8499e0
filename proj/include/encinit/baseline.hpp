#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "encinit/core.hpp"

namespace encinit {

/**
 * Discrete-time baseline model x_{k+1} = f(x_k, u_k), y_k = h(x_k, u_k)
 * with fixed physical parameters.
 *
 * The adjoint products return J^T w for the Jacobian of f (or h) with respect
 * to the state. The defaults use central finite differences; models used in
 * training override them with exact expressions.
 */
class NonlinearBaseline {
 public:
  virtual ~NonlinearBaseline() = default;

  virtual Index nx() const = 0;
  virtual Index nu() const = 0;
  virtual Index ny() const = 0;

  virtual Vector f(const Vector& x, const Vector& u) const = 0;
  virtual Vector h(const Vector& x, const Vector& u) const = 0;

  virtual Vector f_adjoint(const Vector& x, const Vector& u, const Vector& w) const;
  virtual Vector h_adjoint(const Vector& x, const Vector& u, const Vector& w) const;

  /// The exact LTI form when the model is linear, otherwise empty.
  virtual std::optional<LtiSS> as_lti() const { return std::nullopt; }
};

using BaselinePtr = std::shared_ptr<const NonlinearBaseline>;

class LtiBaseline final : public NonlinearBaseline {
 public:
  explicit LtiBaseline(LtiSS ss);

  Index nx() const override { return ss_.nx(); }
  Index nu() const override { return ss_.nu(); }
  Index ny() const override { return ss_.ny(); }

  Vector f(const Vector& x, const Vector& u) const override { return ss_.A * x + ss_.B * u; }
  Vector h(const Vector& x, const Vector& u) const override { return ss_.C * x + ss_.D * u; }
  Vector f_adjoint(const Vector&, const Vector&, const Vector& w) const override {
    return ss_.A.transpose() * w;
  }
  Vector h_adjoint(const Vector&, const Vector&, const Vector& w) const override {
    return ss_.C.transpose() * w;
  }
  std::optional<LtiSS> as_lti() const override { return ss_; }

  const LtiSS& model() const { return ss_; }

 private:
  LtiSS ss_;
};

/// Baseline assembled from callables; mainly for tests and small experiments.
class FunctionBaseline final : public NonlinearBaseline {
 public:
  using Map = std::function<Vector(const Vector&, const Vector&)>;

  FunctionBaseline(Index nx, Index nu, Index ny, Map f, Map h)
      : nx_(nx), nu_(nu), ny_(ny), f_(std::move(f)), h_(std::move(h)) {}

  Index nx() const override { return nx_; }
  Index nu() const override { return nu_; }
  Index ny() const override { return ny_; }
  Vector f(const Vector& x, const Vector& u) const override { return f_(x, u); }
  Vector h(const Vector& x, const Vector& u) const override { return h_(x, u); }

 private:
  Index nx_, nu_, ny_;
  Map f_, h_;
};

/// Central-difference Jacobian of `fn` at `at`, step max(1e-6, 1e-6 |coordinate|) per column.
Matrix central_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& at);

/**
 * Open-loop simulation from x0 on the inputs u (n_u x N).
 * Returns states (n_x x N, column k = x_k) and outputs (n_y x N).
 * Throws DivergenceError with the step index when a state becomes non-finite.
 */
struct Trajectory {
  Matrix x;
  Matrix y;
};
Trajectory simulate(const NonlinearBaseline& model, const Matrix& u, const Vector& x0);

}  // namespace encinit
