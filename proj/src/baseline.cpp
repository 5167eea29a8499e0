#include "encinit/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace encinit {

Matrix central_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& at) {
  const Vector f0 = fn(at);
  Matrix J(f0.size(), at.size());
  Vector probe = at;
  for (Index j = 0; j < at.size(); ++j) {
    const double step = std::max(1e-6, 1e-6 * std::abs(at(j)));
    probe(j) = at(j) + step;
    const Vector fp = fn(probe);
    probe(j) = at(j) - step;
    const Vector fm = fn(probe);
    probe(j) = at(j);
    J.col(j) = (fp - fm) / (2.0 * step);
  }
  return J;
}

Vector NonlinearBaseline::f_adjoint(const Vector& x, const Vector& u, const Vector& w) const {
  return central_jacobian([&](const Vector& xx) { return f(xx, u); }, x).transpose() * w;
}

Vector NonlinearBaseline::h_adjoint(const Vector& x, const Vector& u, const Vector& w) const {
  return central_jacobian([&](const Vector& xx) { return h(xx, u); }, x).transpose() * w;
}

LtiBaseline::LtiBaseline(LtiSS ss) : ss_(std::move(ss)) { ss_.validate(); }

Trajectory simulate(const NonlinearBaseline& model, const Matrix& u, const Vector& x0) {
  if (u.rows() != model.nu()) throw DimensionError("input dimension does not match the model");
  if (x0.size() != model.nx()) throw DimensionError("initial state dimension does not match the model");
  const Index N = u.cols();
  Trajectory t{Matrix(model.nx(), N), Matrix(model.ny(), N)};
  Vector x = x0;
  for (Index k = 0; k < N; ++k) {
    const Vector uk = u.col(k);
    t.x.col(k) = x;
    t.y.col(k) = model.h(x, uk);
    x = model.f(x, uk);
    if (!x.allFinite()) throw DivergenceError("baseline simulation produced a non-finite state", k + 1);
  }
  return t;
}

}  // namespace encinit
