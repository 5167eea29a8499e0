#include "encinit/augmented_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "csv_util.hpp"

namespace encinit {

namespace {

Index lags(const AugmentedModel& m) { return std::max(m.encoder.n_a(), m.encoder.n_b()); }

void check_section(const AugmentedModel& model, const IoDataset& data, Index k, Index T) {
  if (T < 1) throw IndexError("section length T=" + std::to_string(T) + " must be >= 1");
  if (k < lags(model)) {
    throw IndexError("section start k=" + std::to_string(k) + " must be >= " +
                     std::to_string(lags(model)) + " (encoder window)");
  }
  if (k + T > data.size()) {
    throw IndexError("section [" + std::to_string(k) + ", " + std::to_string(k + T) +
                     ") exceeds N=" + std::to_string(data.size()));
  }
}

Vector concat(const Vector& x, const Vector& u) {
  Vector in(x.size() + u.size());
  in << x, u;
  return in;
}

}  // namespace

AugmentedModel AugmentedModel::create(BaselinePtr baseline, EncoderNet encoder, RngStream& rng,
                                      const std::vector<Index>& hidden) {
  const Index nx = baseline->nx();
  const Index nu = baseline->nu();
  ResNet f_aug = ResNet::random(nx + nu, nx, hidden, rng);
  f_aug.zero_output();
  AugmentedModel m{std::move(baseline), std::move(f_aug), std::move(encoder)};
  m.validate();
  return m;
}

void AugmentedModel::validate() const {
  if (!baseline) throw DimensionError("augmented model has no baseline");
  const Index nx = baseline->nx();
  if (f_aug.input_dim() != nx + baseline->nu() || f_aug.output_dim() != nx) {
    throw DimensionError("f_aug must map R^(n_x + n_u) to R^n_x");
  }
  if (encoder.nx() != nx || encoder.ny() != baseline->ny() || encoder.nu() != baseline->nu()) {
    throw DimensionError("encoder dimensions do not match the baseline");
  }
}

StepResult step(const AugmentedModel& model, const Vector& x, const Vector& u) {
  StepResult r{model.baseline->f(x, u) + model.f_aug.forward(concat(x, u)), model.baseline->h(x, u)};
  if (!r.x_next.allFinite() || !r.y.allFinite()) throw DivergenceError("augmented step is non-finite", 0);
  return r;
}

Matrix rollout(const AugmentedModel& model, const IoDataset& data, Index k, Index T) {
  check_section(model, data, k, T);
  Matrix out(model.baseline->ny(), T);
  Vector x = model.encoder.encode(data.y, data.u, k);
  for (Index t = 0; t < T; ++t) {
    const Vector u = data.u.col(k + t);
    out.col(t) = model.baseline->h(x, u);
    if (t + 1 < T) {
      x = model.baseline->f(x, u) + model.f_aug.forward(concat(x, u));
      if (!x.allFinite()) throw DivergenceError("rollout produced a non-finite state", k + t + 1);
    }
  }
  return out;
}

double loss_tstep(const AugmentedModel& model, const IoDataset& data, const std::vector<Index>& starts,
                  Index T) {
  if (starts.empty()) return 0.0;
  double total = 0.0;
  for (Index k : starts) total += (rollout(model, data, k, T) - data.y.middleCols(k, T)).squaredNorm();
  return total / static_cast<double>(starts.size() * static_cast<std::size_t>(T));
}

LossGradient loss_and_gradient(const AugmentedModel& model, const IoDataset& data,
                               const std::vector<Index>& starts, Index T) {
  const auto& base = *model.baseline;
  const Index nx = base.nx();
  ResNet enc_grad = model.encoder.net().zeros_like();
  ResNet aug_grad = model.f_aug.zeros_like();
  double total = 0.0;
  const double scale = starts.empty() ? 0.0 : 1.0 / static_cast<double>(starts.size() * static_cast<std::size_t>(T));

  std::vector<Vector> xs(static_cast<std::size_t>(T));
  std::vector<Vector> residuals(static_cast<std::size_t>(T));
  std::vector<Mlp::Cache> aug_caches(static_cast<std::size_t>(T));
  Mlp::Cache enc_cache;

  for (Index k : starts) {
    check_section(model, data, k, T);
    const Vector w = model.encoder.window(data.y, data.u, k);
    xs[0] = model.encoder.net().forward(w, enc_cache);
    for (Index t = 0; t < T; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      const Vector u = data.u.col(k + t);
      residuals[ti] = base.h(xs[ti], u) - data.y.col(k + t);
      total += residuals[ti].squaredNorm();
      if (t + 1 < T) {
        xs[ti + 1] = base.f(xs[ti], u) + model.f_aug.forward(concat(xs[ti], u), aug_caches[ti]);
        if (!xs[ti + 1].allFinite()) throw DivergenceError("rollout produced a non-finite state", k + t + 1);
      }
    }

    // adjoint of the state, running backwards through the section
    Vector lambda = Vector::Zero(nx);
    for (Index t = T; t-- > 0;) {
      const auto ti = static_cast<std::size_t>(t);
      const Vector u = data.u.col(k + t);
      Vector adj = base.h_adjoint(xs[ti], u, (2.0 * scale) * residuals[ti]);
      if (t + 1 < T) {
        adj += base.f_adjoint(xs[ti], u, lambda);
        adj += model.f_aug.backward(aug_caches[ti], lambda, aug_grad).head(nx);
      }
      lambda = std::move(adj);
    }
    model.encoder.net().backward(enc_cache, lambda, enc_grad);
  }
  return LossGradient{total * scale, enc_grad.flatten(), aug_grad.flatten()};
}

double rmse_simulation(const AugmentedModel& model, const IoDataset& data) {
  const Index k0 = lags(model);
  if (data.size() <= k0) throw IndexError("record too short for the encoder window");
  const Matrix yhat = rollout(model, data, k0, data.size() - k0);
  const double sse = (yhat - data.y.rightCols(data.size() - k0)).squaredNorm();
  return std::sqrt(sse / static_cast<double>(data.size() - k0));
}

std::vector<double> tstep_rmse(const AugmentedModel& model, const IoDataset& data,
                               const std::vector<Index>& starts, const std::vector<Index>& horizons) {
  if (horizons.empty()) return {};
  const Index longest = *std::max_element(horizons.begin(), horizons.end());
  std::vector<double> sse(horizons.size(), 0.0);
  for (Index k : starts) {
    const Matrix err = rollout(model, data, k, longest) - data.y.middleCols(k, longest);
    Vector per_step = err.colwise().squaredNorm().transpose();
    for (std::size_t h = 0; h < horizons.size(); ++h) sse[h] += per_step.head(horizons[h]).sum();
  }
  std::vector<double> out(horizons.size());
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    out[h] = std::sqrt(sse[h] / static_cast<double>(starts.size() * static_cast<std::size_t>(horizons[h])));
  }
  return out;
}

std::vector<Index> spaced_starts(const AugmentedModel& model, Index N, Index horizon, Index count) {
  const Index first = lags(model);
  const Index last = N - horizon;
  if (last < first) throw IndexError("record of length " + std::to_string(N) + " too short for horizon " +
                                     std::to_string(horizon));
  count = std::max<Index>(1, std::min(count, last - first + 1));
  std::vector<Index> starts(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    starts[static_cast<std::size_t>(i)] =
        count == 1 ? first : first + (i * (last - first)) / (count - 1);
  }
  return starts;
}

void TrainConfig::validate() const {
  if (T < 1 || epochs < 0 || batch_size < 1 || n_a < 1 || n_b < 1 || val_sections < 1) {
    throw ConfigError("training configuration values must be positive");
  }
  if (!(adam.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  for (Index h : val_horizons)
    if (h < 1) throw ConfigError("validation horizons must be positive");
}

TrainResult train(const AugmentedModel& initial, const IoDataset& est, const IoDataset& val,
                  const TrainConfig& cfg) {
  cfg.validate();
  initial.validate();
  TrainResult result{initial, {}};
  AugmentedModel& model = result.model;
  const Index first = lags(model);
  const Index last_start = est.size() - cfg.T;
  if (last_start < first) throw IndexError("estimation record too short for T and the encoder window");
  const Index longest = cfg.val_horizons.empty()
                            ? 1
                            : *std::max_element(cfg.val_horizons.begin(), cfg.val_horizons.end());
  const auto val_starts = spaced_starts(model, val.size(), longest, cfg.val_sections);

  const Index n_enc = model.encoder.net().parameter_count();
  Vector params(n_enc + model.f_aug.parameter_count());
  params << model.encoder.net().flatten(), model.f_aug.flatten();
  AdamState adam(params.size(), cfg.adam);
  RngStream rng(cfg.seed, cfg.stream);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Index> batch(static_cast<std::size_t>(cfg.batch_size));
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& k : batch) k = rng.uniform_index(first, last_start);
    HistoryRow row;
    row.epoch = epoch;
    row.val_rmse = tstep_rmse(model, val, val_starts, cfg.val_horizons);

    LossGradient g;
    try {
      g = loss_and_gradient(model, est, batch, cfg.T);
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged", epoch);
    }
    row.train_loss = g.loss;
    if (!std::isfinite(g.loss)) throw DivergenceError("training loss is non-finite", epoch);

    Vector grad(params.size());
    grad << g.encoder, g.f_aug;
    try {
      adam_step(adam, params, grad);
    } catch (const DivergenceError&) {
      throw DivergenceError("non-finite gradient during training", epoch);
    }
    model.encoder.net().assign(params.head(n_enc));
    model.f_aug.assign(params.tail(params.size() - n_enc));

    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(std::move(row));
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::vector<Index>& horizons,
                       std::ostream& os) {
  os << "epoch,train_loss";
  for (Index h : horizons) os << ",val_rmse_T" << h;
  os << ",wall_ms\n";
  for (const auto& row : history) {
    os << row.epoch << ',' << detail::format_double(row.train_loss);
    for (double v : row.val_rmse) os << ',' << detail::format_double(v);
    os << ',' << detail::format_double(row.wall_ms) << '\n';
  }
}

}  // namespace encinit
