#include "encinit/neural.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "csv_util.hpp"

namespace encinit {

Mlp::Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].b.size() != layers_[l].W.rows()) throw DimensionError("layer bias size mismatch");
    if (l > 0 && layers_[l].W.cols() != layers_[l - 1].W.rows()) {
      throw DimensionError("layer " + std::to_string(l) + " does not chain with its predecessor");
    }
  }
}

Mlp Mlp::zeros(const std::vector<Index>& dims) {
  std::vector<Dense> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layers.push_back({Matrix::Zero(dims[l + 1], dims[l]), Vector::Zero(dims[l + 1])});
  }
  return Mlp(std::move(layers));
}

Vector Mlp::forward(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("MLP input has size " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  Vector a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].W * a + layers_[l].b;
    a = (l + 1 < layers_.size()) ? Vector(z.array().tanh()) : z;
  }
  return a;
}

Vector Mlp::forward(const Vector& x, Cache& cache) const {
  if (x.size() != input_dim()) {
    throw DimensionError("MLP input has size " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  cache.inputs.resize(layers_.size());
  Vector a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs[l] = a;
    Vector z = layers_[l].W * a + layers_[l].b;
    a = (l + 1 < layers_.size()) ? Vector(z.array().tanh()) : z;
  }
  return a;
}

Vector Mlp::backward(const Cache& cache, const Vector& out_grad, Mlp& grad) const {
  if (out_grad.size() != output_dim()) throw DimensionError("MLP output gradient size mismatch");
  if (cache.inputs.size() != layers_.size()) throw DimensionError("MLP cache does not match network");
  Vector delta = out_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Vector& a = cache.inputs[l];
    grad.layers_[l].W.noalias() += delta * a.transpose();
    grad.layers_[l].b += delta;
    Vector back = layers_[l].W.transpose() * delta;
    if (l > 0) {
      // a = tanh(z) for every layer input except the network input
      delta = back.array() * (1.0 - a.array().square());
    } else {
      delta = std::move(back);
    }
  }
  return delta;
}

Mlp init_random(const std::vector<Index>& dims, RngStream& rng) {
  std::vector<Dense> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    layers.push_back({rng.uniform_matrix(dims[l + 1], dims[l], -bound, bound), Vector::Zero(dims[l + 1])});
  }
  return Mlp(std::move(layers));
}

Mlp zero_final_layer(const Mlp& net) {
  Mlp out = net;
  if (!out.layers().empty()) {
    out.layers().back().W.setZero();
    out.layers().back().b.setZero();
  }
  return out;
}

ResNet::ResNet(Matrix linear, Vector bias, Mlp residual)
    : linear_(std::move(linear)), bias_(std::move(bias)), residual_(std::move(residual)) {
  if (bias_.size() != linear_.rows()) throw DimensionError("ResNet bias size mismatch");
  if (residual_.depth() > 0 &&
      (residual_.input_dim() != linear_.cols() || residual_.output_dim() != linear_.rows())) {
    throw DimensionError("ResNet residual dimensions differ from the bypass");
  }
}

ResNet ResNet::random(Index in, Index out, const std::vector<Index>& hidden, RngStream& rng) {
  std::vector<Index> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix linear = rng.uniform_matrix(out, in, -bound, bound);
  Mlp residual = init_random(dims, rng);
  return ResNet(std::move(linear), Vector::Zero(out), std::move(residual));
}

Vector ResNet::forward(const Vector& x) const {
  Vector out = linear_ * x + bias_;
  if (residual_.depth() > 0) out += residual_.forward(x);
  return out;
}

Vector ResNet::forward(const Vector& x, Mlp::Cache& cache) const {
  Vector out = linear_ * x + bias_;
  if (residual_.depth() > 0) out += residual_.forward(x, cache);
  else cache.inputs.assign(1, x);
  return out;
}

Vector ResNet::backward(const Mlp::Cache& cache, const Vector& out_grad, ResNet& grad) const {
  if (cache.inputs.empty()) throw DimensionError("ResNet backward needs a forward cache");
  const Vector& x = cache.inputs.front();
  grad.linear_.noalias() += out_grad * x.transpose();
  grad.bias_ += out_grad;
  Vector in_grad = linear_.transpose() * out_grad;
  if (residual_.depth() > 0) in_grad += residual_.backward(cache, out_grad, grad.residual_);
  return in_grad;
}

ResNet ResNet::zeros_like() const {
  ResNet z = *this;
  z.linear_.setZero();
  z.bias_.setZero();
  for (auto& layer : z.residual_.layers()) {
    layer.W.setZero();
    layer.b.setZero();
  }
  return z;
}

void ResNet::zero_output() {
  linear_.setZero();
  bias_.setZero();
  residual_ = zero_final_layer(residual_);
}

template <class Self, class Fn>
void ResNet::visit(Self& self, Fn&& fn) {
  fn(self.linear_);
  fn(self.bias_);
  for (auto& layer : self.residual_.layers()) {
    fn(layer.W);
    fn(layer.b);
  }
}

Index ResNet::parameter_count() const {
  Index count = 0;
  visit(*this, [&](const auto& block) { count += block.size(); });
  return count;
}

Vector ResNet::flatten() const {
  Vector out(parameter_count());
  Index offset = 0;
  visit(*this, [&](const auto& block) {
    out.segment(offset, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
    offset += block.size();
  });
  return out;
}

void ResNet::assign(const Vector& params) {
  if (params.size() != parameter_count()) throw DimensionError("parameter vector size mismatch");
  Index offset = 0;
  visit(*this, [&](auto& block) {
    Eigen::Map<Vector>(block.data(), block.size()) = params.segment(offset, block.size());
    offset += block.size();
  });
}

EncoderNet::EncoderNet(ResNet net, Index n_a, Index n_y, Index n_b, Index n_u)
    : net_(std::move(net)), n_a_(n_a), n_y_(n_y), n_b_(n_b), n_u_(n_u) {
  if (n_a < 0 || n_b < 0) throw DimensionError("encoder lags must be non-negative");
  if (net_.input_dim() != input_dim()) {
    throw DimensionError("encoder network input " + std::to_string(net_.input_dim()) +
                         " differs from n_a*n_y + n_b*n_u = " + std::to_string(input_dim()));
  }
}

EncoderNet EncoderNet::random(Index n_a, Index n_y, Index n_b, Index n_u, Index n_x,
                              const std::vector<Index>& hidden, RngStream& rng) {
  return EncoderNet(ResNet::random(n_a * n_y + n_b * n_u, n_x, hidden, rng), n_a, n_y, n_b, n_u);
}

Vector EncoderNet::window(const Matrix& y, const Matrix& u, Index k) const {
  if (y.rows() != n_y_ || u.rows() != n_u_) throw DimensionError("encoder data dimensions mismatch");
  const Index lags = std::max(n_a_, n_b_);
  if (k < lags || k > y.cols() || k > u.cols()) {
    throw IndexError("encoder window for k=" + std::to_string(k) + " needs " +
                     std::to_string(lags) + " <= k <= N=" + std::to_string(y.cols()));
  }
  Vector w(input_dim());
  w.head(n_a_ * n_y_) = stack_descending(y, k - 1, n_a_);
  w.tail(n_b_ * n_u_) = stack_descending(u, k - 1, n_b_);
  return w;
}

const Vector& EncoderNet::check(const Vector& window) const {
  if (window.size() != input_dim()) {
    throw DimensionError("encoder input has size " + std::to_string(window.size()) + ", expected " +
                         std::to_string(input_dim()));
  }
  return window;
}

AdamState::AdamState(Index parameter_count, AdamConfig cfg)
    : cfg_(cfg), m_(Vector::Zero(parameter_count)), v_(Vector::Zero(parameter_count)) {}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (params.size() != state.m_.size() || grads.size() != state.m_.size()) {
    throw DimensionError("Adam state, parameters and gradients must have the same size");
  }
  if (!grads.allFinite()) throw DivergenceError("non-finite gradient passed to Adam", state.steps_);
  const auto& c = state.cfg_;
  ++state.steps_;
  state.m_ = c.beta1 * state.m_ + (1.0 - c.beta1) * grads;
  state.v_ = c.beta2 * state.v_ + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.steps_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.steps_));
  params.array() -= c.lr * (state.m_.array() / bc1) / ((state.v_.array() / bc2).sqrt() + c.eps);
}

void write_resnet_csv(const ResNet& net, std::ostream& os) {
  os << "layer,row,col,value\n";
  auto dump = [&os](std::size_t layer, const Matrix& W, const Vector& b) {
    for (Index i = 0; i < W.rows(); ++i) {
      for (Index j = 0; j < W.cols(); ++j)
        os << layer << ',' << i << ',' << j << ',' << detail::format_double(W(i, j)) << '\n';
      os << layer << ',' << i << ',' << W.cols() << ',' << detail::format_double(b(i)) << '\n';
    }
  };
  dump(0, net.linear(), net.bias());
  const auto& layers = net.residual().layers();
  for (std::size_t l = 0; l < layers.size(); ++l) dump(l + 1, layers[l].W, layers[l].b);
}

ResNet read_resnet_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != "layer,row,col,value") {
    throw IoError("network CSV: bad header");
  }
  struct Entry {
    Index row, col;
    double value;
  };
  std::map<long, std::vector<Entry>> by_layer;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line));
    if (f.size() != 4) throw IoError("network CSV: rows need 4 fields");
    const long layer = detail::parse_long(f[0], "network CSV");
    const Index r = detail::parse_long(f[1], "network CSV");
    const Index c = detail::parse_long(f[2], "network CSV");
    if (layer < 0 || r < 0 || c < 0) throw IoError("network CSV: negative index");
    by_layer[layer].push_back({r, c, detail::parse_double(f[3], "network CSV")});
  }
  if (by_layer.empty() || by_layer.begin()->first != 0) throw IoError("network CSV: missing bypass layer 0");

  auto build = [](const std::vector<Entry>& entries) {
    Index rows = 0, cols = 0;
    for (const auto& e : entries) {
      rows = std::max(rows, e.row + 1);
      cols = std::max(cols, e.col);
    }
    Dense d{Matrix::Zero(rows, cols), Vector::Zero(rows)};
    for (const auto& e : entries) {
      if (e.col == cols) d.b(e.row) = e.value;
      else d.W(e.row, e.col) = e.value;
    }
    return d;
  };

  Dense bypass = build(by_layer.begin()->second);
  std::vector<Dense> layers;
  long expected = 1;
  for (auto it = std::next(by_layer.begin()); it != by_layer.end(); ++it, ++expected) {
    if (it->first != expected) throw IoError("network CSV: layer indices are not contiguous");
    layers.push_back(build(it->second));
  }
  return ResNet(std::move(bypass.W), std::move(bypass.b), Mlp(std::move(layers)));
}

void save_resnet(const ResNet& net, const std::string& path) {
  auto os = detail::open_out(path);
  write_resnet_csv(net, os);
}

ResNet load_resnet(const std::string& path) {
  auto is = detail::open_in(path);
  return read_resnet_csv(is);
}

}  // namespace encinit
