#include "encinit/lti_reconstruct.hpp"

#include <Eigen/SVD>

#include <istream>
#include <ostream>

#include "csv_util.hpp"

namespace encinit {

namespace {

// [0, M, A M, ..., A^{n-1} M] with blocks of width M.cols().
Matrix impulse_row(const Matrix& A, const Matrix& M, Index n) {
  const Index w = M.cols();
  Matrix out = Matrix::Zero(A.rows(), (n + 1) * w);
  Matrix AjM = M;
  for (Index j = 1; j <= n; ++j) {
    out.middleCols(j * w, w) = AjM;
    AjM = A * AjM;
  }
  return out;
}

// Block Toeplitz with `diag` on the block diagonal and C A^{j-i-1} M above it.
Matrix upper_toeplitz(const Matrix& A, const Matrix& C, const Matrix& M, const Matrix& diag, Index n) {
  const Index ny = C.rows();
  const Index w = M.cols();
  Matrix out = Matrix::Zero((n + 1) * ny, (n + 1) * w);
  // markov[d] = C A^{d-1} M for d >= 1
  std::vector<Matrix> markov(static_cast<std::size_t>(n + 1));
  Matrix AjM = M;
  for (Index d = 1; d <= n; ++d) {
    markov[static_cast<std::size_t>(d)] = C * AjM;
    AjM = A * AjM;
  }
  for (Index i = 0; i <= n; ++i) {
    out.block(i * ny, i * w, ny, w) = diag;
    for (Index j = i + 1; j <= n; ++j) {
      out.block(i * ny, j * w, ny, w) = markov[static_cast<std::size_t>(j - i)];
    }
  }
  return out;
}

Matrix matrix_power(const Matrix& A, Index n) {
  Matrix out = Matrix::Identity(A.rows(), A.cols());
  for (Index j = 0; j < n; ++j) out = out * A;
  return out;
}

void maybe_warn_unstable(const Matrix& A, ReconstructabilityMaps& maps) {
  const double rho = spectral_radius(A);
  if (rho >= 1.0) {
    maps.warnings.push_back("transition matrix has spectral radius " + std::to_string(rho) +
                            " >= 1; reconstruction error is amplified by its n-th power");
  }
}

}  // namespace

StackedOperators build_stacked(const LtiSS& ss, Index n) {
  ss.validate();
  if (n < 0) throw IndexError("window length n=" + std::to_string(n) + " must be >= 0");

  Matrix A = ss.A;
  Matrix B = ss.B;
  if (ss.K) {
    A = ss.A - *ss.K * ss.C;
    B = ss.B - *ss.K * ss.D;
  }

  StackedOperators ops;
  ops.n = n;
  ops.observability = observability_matrix(A, ss.C, n);
  ops.toeplitz = upper_toeplitz(A, ss.C, B, ss.D, n);
  ops.state_input = impulse_row(A, B, n);
  ops.transition_power = matrix_power(A, n);
  if (ss.K) {
    ops.output_feedback = upper_toeplitz(A, ss.C, *ss.K, Matrix::Zero(ss.ny(), ss.ny()), n);
    ops.state_output = impulse_row(A, *ss.K, n);
  }
  return ops;
}

Matrix left_inverse(const Matrix& O) {
  const Index rank = numerical_rank(O);
  if (rank < O.cols()) throw UnobservableError(rank, O.cols());
  Eigen::JacobiSVD<Matrix> svd(O, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector inv_s = svd.singularValues().cwiseInverse();
  return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
}

ReconstructabilityMaps noiseless_maps(const LtiSS& ss, Index n) {
  LtiSS plain = ss;
  plain.K.reset();
  const auto ops = build_stacked(plain, n);
  const Matrix gain = ops.transition_power * left_inverse(ops.observability);

  ReconstructabilityMaps maps;
  maps.W_y = gain;
  maps.W_u = ops.state_input - gain * ops.toeplitz;
  maps.n = n;
  maps.noisy = false;
  maybe_warn_unstable(plain.A, maps);
  return maps;
}

ReconstructabilityMaps noisy_maps(const LtiSS& ss, Index n) {
  if (!ss.K) throw DimensionError("noisy_maps requires an innovation-form model (K present)");
  const auto ops = build_stacked(ss, n);
  const Matrix gain = ops.transition_power * left_inverse(ops.observability);
  const Index rows = ops.observability.rows();

  ReconstructabilityMaps maps;
  maps.W_y = gain * (Matrix::Identity(rows, rows) - *ops.output_feedback) + *ops.state_output;
  maps.W_u = ops.state_input - gain * ops.toeplitz;
  maps.n = n;
  maps.noisy = true;
  maybe_warn_unstable(ss.A - *ss.K * ss.C, maps);
  return maps;
}

Matrix noise_error_gain(const LtiSS& ss, Index n) {
  if (!ss.K) throw DimensionError("noise_error_gain requires an innovation-form model (K present)");
  const auto ops = build_stacked(ss, n);
  return ops.transition_power * left_inverse(ops.observability);
}

Vector reconstruct(const ReconstructabilityMaps& maps, const StackedWindow& w) {
  if (w.n != maps.n || w.y_stack.size() != maps.W_y.cols() || w.u_stack.size() != maps.W_u.cols()) {
    throw DimensionError("window (n=" + std::to_string(w.n) + ", " +
                         std::to_string(w.y_stack.size()) + " outputs, " +
                         std::to_string(w.u_stack.size()) + " inputs) does not match maps (n=" +
                         std::to_string(maps.n) + ", " + std::to_string(maps.W_y.cols()) + ", " +
                         std::to_string(maps.W_u.cols()) + ")");
  }
  return maps.W_y * w.y_stack + maps.W_u * w.u_stack;
}

ReconstructabilityMaps shift_to_past_window(const ReconstructabilityMaps& maps, const LtiSS& ss) {
  ss.validate();
  if (maps.nx() != ss.nx() || maps.ny() != ss.ny() || maps.nu() != ss.nu()) {
    throw DimensionError("maps and model dimensions differ");
  }
  Matrix A = ss.A;
  Matrix B = ss.B;
  if (maps.noisy) {
    if (!ss.K) throw DimensionError("noisy maps need the innovation-form model to be shifted");
    A = ss.A - *ss.K * ss.C;
    B = ss.B - *ss.K * ss.D;
  }
  ReconstructabilityMaps out = maps;
  out.W_y = A * maps.W_y;
  out.W_u = A * maps.W_u;
  out.W_u.leftCols(ss.nu()) += B;
  if (maps.noisy) out.W_y.leftCols(ss.ny()) += *ss.K;
  out.lag = maps.lag + 1;
  return out;
}

void write_maps_csv(const ReconstructabilityMaps& maps, std::ostream& os) {
  os << "n,noisy,lag,n_x,n_y,n_u\n";
  os << maps.n << ',' << (maps.noisy ? 1 : 0) << ',' << maps.lag << ',' << maps.nx() << ','
     << maps.ny() << ',' << maps.nu() << '\n';
  os << "matrix,row,col,value\n";
  auto dump = [&os](const char* name, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        os << name << ',' << i << ',' << j << ',' << detail::format_double(m(i, j)) << '\n';
  };
  dump("W_y", maps.W_y);
  dump("W_u", maps.W_u);
}

ReconstructabilityMaps read_maps_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != "n,noisy,lag,n_x,n_y,n_u") {
    throw IoError("maps CSV: bad header");
  }
  if (!std::getline(is, line)) throw IoError("maps CSV: missing dimension row");
  const auto dims = detail::split(detail::trim(line));
  if (dims.size() != 6) throw IoError("maps CSV: dimension row needs 6 fields");
  ReconstructabilityMaps maps;
  maps.n = detail::parse_long(dims[0], "maps CSV");
  maps.noisy = detail::parse_long(dims[1], "maps CSV") != 0;
  maps.lag = detail::parse_long(dims[2], "maps CSV");
  const Index nx = detail::parse_long(dims[3], "maps CSV");
  const Index ny = detail::parse_long(dims[4], "maps CSV");
  const Index nu = detail::parse_long(dims[5], "maps CSV");
  maps.W_y = Matrix::Zero(nx, (maps.n + 1) * ny);
  maps.W_u = Matrix::Zero(nx, (maps.n + 1) * nu);
  if (!std::getline(is, line) || detail::trim(line) != "matrix,row,col,value") {
    throw IoError("maps CSV: missing entry header");
  }
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line));
    if (f.size() != 4) throw IoError("maps CSV: entry rows need 4 fields");
    Matrix* target = f[0] == "W_y" ? &maps.W_y : f[0] == "W_u" ? &maps.W_u : nullptr;
    if (!target) throw IoError("maps CSV: unknown matrix '" + f[0] + "'");
    const Index r = detail::parse_long(f[1], "maps CSV");
    const Index c = detail::parse_long(f[2], "maps CSV");
    if (r < 0 || c < 0 || r >= target->rows() || c >= target->cols()) {
      throw IoError("maps CSV: entry (" + f[1] + "," + f[2] + ") outside " + f[0]);
    }
    (*target)(r, c) = detail::parse_double(f[3], "maps CSV");
  }
  return maps;
}

void save_maps(const ReconstructabilityMaps& maps, const std::string& path) {
  auto os = detail::open_out(path);
  write_maps_csv(maps, os);
}

ReconstructabilityMaps load_maps(const std::string& path) {
  auto is = detail::open_in(path);
  return read_maps_csv(is);
}

}  // namespace encinit
