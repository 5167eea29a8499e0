#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "encinit/core.hpp"

namespace encinit {

struct Dense {
  Matrix W;
  Vector b;
};

/// Multilayer perceptron: tanh on every hidden layer, identity on the output layer.
class Mlp {
 public:
  /// Per-layer inputs recorded by the caching forward pass.
  struct Cache {
    std::vector<Vector> inputs;
  };

  Mlp() = default;
  explicit Mlp(std::vector<Dense> layers);

  /// All-zero network with the given layer widths {in, h1, ..., out}.
  static Mlp zeros(const std::vector<Index>& dims);

  Index input_dim() const { return layers_.empty() ? 0 : layers_.front().W.cols(); }
  Index output_dim() const { return layers_.empty() ? 0 : layers_.back().W.rows(); }
  std::size_t depth() const { return layers_.size(); }

  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }

  Vector forward(const Vector& x) const;
  Vector forward(const Vector& x, Cache& cache) const;

  /// Adds d<g, forward(x)>/d(params) into `grad` and returns the gradient w.r.t. the input.
  Vector backward(const Cache& cache, const Vector& out_grad, Mlp& grad) const;

 private:
  std::vector<Dense> layers_;
};

/// Glorot-uniform weights, zero biases.
Mlp init_random(const std::vector<Index>& dims, RngStream& rng);

/// Copy with the output layer's weights and bias set to zero.
Mlp zero_final_layer(const Mlp& net);

/**
 * Residual network: out = linear * in + bias + residual(in).
 * The linear bypass carries the affine part; the MLP the nonlinear correction.
 */
class ResNet {
 public:
  ResNet() = default;
  ResNet(Matrix linear, Vector bias, Mlp residual);

  /// Random bypass and residual, hidden widths `hidden`.
  static ResNet random(Index in, Index out, const std::vector<Index>& hidden, RngStream& rng);

  Index input_dim() const { return linear_.cols(); }
  Index output_dim() const { return linear_.rows(); }

  Vector forward(const Vector& x) const;
  Vector forward(const Vector& x, Mlp::Cache& cache) const;
  Vector backward(const Mlp::Cache& cache, const Vector& out_grad, ResNet& grad) const;

  /// Same shapes, all parameters zero (gradient accumulator).
  ResNet zeros_like() const;

  /// Zeroes the bypass, the bias and the residual output layer so the network outputs 0.
  void zero_output();

  Index parameter_count() const;
  Vector flatten() const;
  void assign(const Vector& params);

  Matrix& linear() { return linear_; }
  const Matrix& linear() const { return linear_; }
  Vector& bias() { return bias_; }
  const Vector& bias() const { return bias_; }
  Mlp& residual() { return residual_; }
  const Mlp& residual() const { return residual_; }

 private:
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn);

  Matrix linear_;
  Vector bias_;
  Mlp residual_;
};

/**
 * Subspace encoder: maps past outputs y_{k-1}, ..., y_{k-n_a} and inputs
 * u_{k-1}, ..., u_{k-n_b} (each stacked newest first, outputs before inputs)
 * to the state estimate at k.
 */
class EncoderNet {
 public:
  EncoderNet() = default;
  EncoderNet(ResNet net, Index n_a, Index n_y, Index n_b, Index n_u);

  static EncoderNet random(Index n_a, Index n_y, Index n_b, Index n_u, Index n_x,
                           const std::vector<Index>& hidden, RngStream& rng);

  Index n_a() const { return n_a_; }
  Index n_b() const { return n_b_; }
  Index ny() const { return n_y_; }
  Index nu() const { return n_u_; }
  Index nx() const { return net_.output_dim(); }
  Index input_dim() const { return n_a_ * n_y_ + n_b_ * n_u_; }

  auto W_y() { return net_.linear().leftCols(n_a_ * n_y_); }
  auto W_y() const { return net_.linear().leftCols(n_a_ * n_y_); }
  auto W_u() { return net_.linear().rightCols(n_b_ * n_u_); }
  auto W_u() const { return net_.linear().rightCols(n_b_ * n_u_); }
  Vector& bias() { return net_.bias(); }
  const Vector& bias() const { return net_.bias(); }

  ResNet& net() { return net_; }
  const ResNet& net() const { return net_; }

  /// Encoder input for the state at sample k of (y, u); requires k >= max(n_a, n_b).
  Vector window(const Matrix& y, const Matrix& u, Index k) const;

  Vector forward(const Vector& window) const { return net_.forward(check(window)); }
  Vector encode(const Matrix& y, const Matrix& u, Index k) const { return net_.forward(window(y, u, k)); }

 private:
  const Vector& check(const Vector& window) const;

  ResNet net_;
  Index n_a_ = 0, n_y_ = 0, n_b_ = 0, n_u_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(Index parameter_count, AdamConfig cfg = {});

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return steps_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

 private:
  friend void adam_step(AdamState& state, Vector& params, const Vector& grads);

  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  long steps_ = 0;
};

/// One bias-corrected Adam update in place. Throws DivergenceError on a non-finite gradient.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

/**
 * Flat CSV with header `layer,row,col,value`. Layer 0 is the linear bypass,
 * layers 1..L the residual MLP. Biases are stored in the column after the
 * last weight column (col == fan_in).
 */
void write_resnet_csv(const ResNet& net, std::ostream& os);
ResNet read_resnet_csv(std::istream& is);
void save_resnet(const ResNet& net, const std::string& path);
ResNet load_resnet(const std::string& path);

}  // namespace encinit
