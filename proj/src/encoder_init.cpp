#include "encinit/encoder_init.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace encinit {

namespace {

Index lags(const EncoderNet& enc) { return std::max(enc.n_a(), enc.n_b()); }

std::vector<Index> hidden_dims(const ResNet& net) {
  std::vector<Index> dims;
  const auto& layers = net.residual().layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) dims.push_back(layers[l].W.rows());
  return dims;
}

ResNet random_like(const ResNet& shape, RngStream& rng) {
  if (shape.residual().depth() == 0) {
    const double bound = std::sqrt(6.0 / static_cast<double>(shape.input_dim() + shape.output_dim()));
    return ResNet(rng.uniform_matrix(shape.output_dim(), shape.input_dim(), -bound, bound),
                  Vector::Zero(shape.output_dim()), Mlp());
  }
  return ResNet::random(shape.input_dim(), shape.output_dim(), hidden_dims(shape), rng);
}

// Tiles `offset` over `blocks` consecutive blocks.
Vector tile(const Vector& offset, Index blocks) {
  Vector out(offset.size() * blocks);
  for (Index j = 0; j < blocks; ++j) out.segment(j * offset.size(), offset.size()) = offset;
  return out;
}

// Encoder windows (columns) and matching targets for every usable sample.
struct Regression {
  Matrix inputs;   // in_dim x M
  Matrix targets;  // n_x x M
};

Regression build_regression(const EncoderNet& enc, const ApproxDataset& approx) {
  const Index first = lags(enc);
  const Index M = approx.size() - first;
  if (M < 1) {
    throw IndexError("approximate dataset of length " + std::to_string(approx.size()) +
                     " has no complete encoder window (needs > " + std::to_string(first) + " samples)");
  }
  if (approx.x_hat.rows() != enc.nx()) throw DimensionError("approximate dataset state dimension mismatch");
  Regression r{Matrix(enc.input_dim(), M), Matrix(enc.nx(), M)};
  for (Index i = 0; i < M; ++i) {
    r.inputs.col(i) = enc.window(approx.y_hat, approx.u, first + i);
    r.targets.col(i) = approx.x_hat.col(first + i);
  }
  return r;
}

}  // namespace

std::string to_string(InitMethod method) {
  switch (method) {
    case InitMethod::random: return "random";
    case InitMethod::model_based: return "model_based";
    case InitMethod::data_based_lls: return "data_based_lls";
    case InitMethod::data_based_ann: return "data_based_ann";
  }
  return "unknown";
}

InitMethod parse_init_method(const std::string& name) {
  if (name == "random") return InitMethod::random;
  if (name == "model" || name == "model_based") return InitMethod::model_based;
  if (name == "lls" || name == "data_based_lls") return InitMethod::data_based_lls;
  if (name == "ann" || name == "data_based_ann") return InitMethod::data_based_ann;
  throw ConfigError("unknown init method '" + name + "' (expected random, model, lls or ann)");
}

ModelBasedMaps model_based_maps(const NonlinearBaseline& baseline, Index n, const std::optional<Matrix>& K) {
  if (auto lti = baseline.as_lti()) {
    LtiSS ss = *lti;
    ss.K = K;
    auto maps = K ? noisy_maps(ss, n) : noiseless_maps(ss, n);
    return ModelBasedMaps{shift_to_past_window(maps, ss), Vector::Zero(ss.nx()), std::nullopt};
  }
  const auto eq = find_equilibrium(baseline, Vector::Zero(baseline.nu()), Vector::Zero(baseline.nx()));
  auto lin = init_from_linearization(baseline, eq, n, K);
  auto shifted = shift_to_past_window(lin.maps, lin.model.lti);
  Vector bias = eq.x_star - shifted.W_y * tile(eq.y_star, n + 1) - shifted.W_u * tile(eq.u_star, n + 1);
  return ModelBasedMaps{std::move(shifted), std::move(bias), std::move(lin.model)};
}

EncoderNet init_model_based(const EncoderNet& enc, const NonlinearBaseline& baseline, std::optional<Index> n,
                            const std::optional<Matrix>& K) {
  const Index shortest = std::min(enc.n_a(), enc.n_b());
  const Index window = n.value_or(shortest - 1);
  if (window < 0 || window + 1 > shortest) {
    throw IndexError("map window n=" + std::to_string(window) + " needs 0 <= n < min(n_a, n_b) = " +
                     std::to_string(shortest));
  }
  if (enc.nx() != baseline.nx() || enc.ny() != baseline.ny() || enc.nu() != baseline.nu()) {
    throw DimensionError("encoder dimensions do not match the baseline");
  }
  const auto mb = model_based_maps(baseline, window, K);

  EncoderNet out = enc;
  out.W_y().setZero();
  out.W_u().setZero();
  out.W_y().leftCols(mb.maps.W_y.cols()) = mb.maps.W_y;
  out.W_u().leftCols(mb.maps.W_u.cols()) = mb.maps.W_u;
  out.bias() = mb.bias;
  out.net().residual() = zero_final_layer(out.net().residual());
  return out;
}

ApproxDataset simulate_baseline(const NonlinearBaseline& baseline, const IoDataset& data, const Vector& x0) {
  const auto traj = simulate(baseline, data.u, x0);
  return ApproxDataset{traj.y, traj.x, data.u};
}

ApproxDataset simulate_baseline_default(const NonlinearBaseline& baseline, const IoDataset& data, Index n_a,
                                        Index n_b) {
  if (auto lti = baseline.as_lti()) {
    const Index n = std::max<Index>(0, std::max(n_a, n_b) - 1);
    if (data.size() > n + 1) {
      try {
        const auto maps = noiseless_maps(*lti, n);
        const Vector x_n = reconstruct(maps, make_window(data, n, n));
        return simulate_baseline(baseline, data.slice(n, data.size() - n), x_n);
      } catch (const UnobservableError&) {
        // fall through to the zero initial state
      }
    }
  }
  return simulate_baseline(baseline, data, Vector::Zero(baseline.nx()));
}

LlsResult init_lls(const EncoderNet& enc, const ApproxDataset& approx) {
  const auto reg = build_regression(enc, approx);
  const Matrix phi = reg.inputs.transpose();
  const Matrix target = reg.targets.transpose();

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(phi);
  const Matrix solution = cod.solve(target);  // in_dim x n_x

  LlsResult r;
  r.rank = cod.rank();
  if (r.rank < phi.cols()) {
    r.warnings.push_back("regressor has rank " + std::to_string(r.rank) + " < " + std::to_string(phi.cols()) +
                         " columns; minimum-norm solution returned (insufficient excitation)");
  }
  r.encoder = enc;
  r.encoder.net().linear() = solution.transpose();
  r.encoder.bias().setZero();
  r.encoder.net().residual() = zero_final_layer(r.encoder.net().residual());
  r.residual = (phi * solution - target).squaredNorm() / static_cast<double>(phi.rows());
  return r;
}

double encoder_state_mse(const EncoderNet& enc, const ApproxDataset& approx) {
  const auto reg = build_regression(enc, approx);
  double sse = 0.0;
  for (Index i = 0; i < reg.inputs.cols(); ++i) {
    sse += (enc.net().forward(reg.inputs.col(i)) - reg.targets.col(i)).squaredNorm();
  }
  return sse / static_cast<double>(reg.inputs.cols());
}

PretrainResult init_ann_pretrain(const EncoderNet& enc, const ApproxDataset& approx, const PretrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("pretraining needs epochs >= 0 and batch_size >= 1");
  const auto reg = build_regression(enc, approx);
  const Index M = reg.inputs.cols();
  const Index in_dim = enc.input_dim();
  const Index nx = enc.nx();

  // standardisation: per input feature, one common scale for all state entries
  const Vector mu_in = reg.inputs.rowwise().mean();
  Vector s_in = ((reg.inputs.colwise() - mu_in).rowwise().squaredNorm() / static_cast<double>(M)).cwiseSqrt();
  for (Index i = 0; i < in_dim; ++i)
    if (!(s_in(i) > 1e-12)) s_in(i) = 1.0;
  const Vector mu_out = reg.targets.rowwise().mean();
  const double spread = std::sqrt((reg.targets.colwise() - mu_out).squaredNorm() / static_cast<double>(M * nx));
  // a constant target is exactly its mean: train on the zero target but fold with scale 0
  const bool flat = !(spread > 1e-12 * (1.0 + mu_out.cwiseAbs().maxCoeff()));
  const double s_out = flat ? 1.0 : spread;
  const double s_fold = flat ? 0.0 : spread;

  const Matrix z = (reg.inputs.colwise() - mu_in).array().colwise() / s_in.array();
  const Matrix t = (reg.targets.colwise() - mu_out) / s_out;

  RngStream rng(cfg.seed, cfg.stream);
  ResNet net = ResNet::random(in_dim, nx, cfg.hidden, rng);
  Vector params = net.flatten();
  AdamState adam(params.size(), cfg.adam);

  auto full_loss = [&](const ResNet& n) {
    double sse = 0.0;
    for (Index i = 0; i < M; ++i) sse += (n.forward(z.col(i)) - t.col(i)).squaredNorm();
    return sse / static_cast<double>(M);
  };

  PretrainResult result;
  std::vector<Index> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), Index{0});
  Mlp::Cache cache;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Index begin = 0; begin < M; begin += cfg.batch_size) {
      const Index end = std::min(M, begin + cfg.batch_size);
      const double scale = 2.0 / static_cast<double>(end - begin);
      ResNet grad = net.zeros_like();
      for (Index b = begin; b < end; ++b) {
        const Index i = order[static_cast<std::size_t>(b)];
        const Vector out = net.forward(z.col(i), cache);
        net.backward(cache, scale * (out - t.col(i)), grad);
      }
      try {
        adam_step(adam, params, grad.flatten());
      } catch (const DivergenceError&) {
        throw DivergenceError("encoder pretraining diverged", epoch);
      }
      net.assign(params);
    }
    const double v = full_loss(net) * s_fold * s_fold;
    if (!std::isfinite(v)) throw DivergenceError("encoder pretraining loss is non-finite", epoch);
    result.v_enc_history.push_back(v);
  }

  // fold the standardisation back: out = s_out * net((w - mu_in) / s_in) + mu_out
  const Vector inv_s = s_in.cwiseInverse();
  const Vector shift = mu_in.cwiseProduct(inv_s);
  ResNet phys = net;
  phys.linear() = s_fold * net.linear() * inv_s.asDiagonal();
  phys.bias() = s_fold * (net.bias() - net.linear() * shift) + mu_out;
  auto& layers = phys.residual().layers();
  if (!layers.empty()) {
    const auto& first = net.residual().layers().front();
    layers.front().W = first.W * inv_s.asDiagonal();
    layers.front().b = first.b - first.W * shift;
    layers.back().W *= s_fold;
    layers.back().b *= s_fold;
  }

  result.encoder = EncoderNet(std::move(phys), enc.n_a(), enc.ny(), enc.n_b(), enc.nu());
  result.v_enc = cfg.epochs > 0 ? result.v_enc_history.back() : encoder_state_mse(result.encoder, approx);
  return result;
}

EncoderNet init_random_encoder(const EncoderNet& enc, RngStream& rng) {
  ResNet net = random_like(enc.net(), rng);
  const double bound = std::sqrt(6.0 / static_cast<double>(net.input_dim() + net.output_dim()));
  net.bias() = rng.uniform_matrix(net.output_dim(), 1, -bound, bound);
  return EncoderNet(std::move(net), enc.n_a(), enc.ny(), enc.n_b(), enc.nu());
}

}  // namespace encinit
