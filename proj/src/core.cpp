#include "encinit/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <istream>
#include <ostream>

#include "csv_util.hpp"

namespace encinit {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const Matrix& m, Index rows, Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + shape(m));
  }
}

}  // namespace

void LtiSS::validate() const {
  if (A.rows() != A.cols()) throw DimensionError("A must be square, got " + shape(A));
  expect_shape(B, nx(), B.cols(), "B");
  expect_shape(C, C.rows(), nx(), "C");
  expect_shape(D, ny(), nu(), "D");
  if (K) expect_shape(*K, nx(), ny(), "K");
  if (sigma_e) {
    expect_shape(*sigma_e, ny(), ny(), "sigma_e");
    const double scale = std::max(1.0, sigma_e->cwiseAbs().maxCoeff());
    if ((*sigma_e - sigma_e->transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw DimensionError("sigma_e must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*sigma_e, Eigen::EigenvaluesOnly);
    if (ny() > 0 && eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw DimensionError("sigma_e must be positive semidefinite");
    }
  }
}

void IoDataset::validate() const {
  if (u.cols() != y.cols()) {
    throw DimensionError("u and y must have the same length, got " + std::to_string(u.cols()) +
                         " and " + std::to_string(y.cols()));
  }
  if (u.cols() < 1) throw DimensionError("dataset must hold at least one sample");
  if (x_true && x_true->cols() != u.cols()) throw DimensionError("x_true length mismatch");
  if (e_true && (e_true->cols() != u.cols() || e_true->rows() != y.rows())) {
    throw DimensionError("e_true shape mismatch");
  }
}

IoDataset IoDataset::slice(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) {
    throw IndexError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside dataset of length " + std::to_string(size()));
  }
  IoDataset out;
  out.u = u.middleCols(begin, count);
  out.y = y.middleCols(begin, count);
  out.ts = ts;
  if (x_true) out.x_true = x_true->middleCols(begin, count);
  if (e_true) out.e_true = e_true->middleCols(begin, count);
  return out;
}

Vector stack_descending(const Matrix& signal, Index k, Index count) {
  if (count < 0 || k >= signal.cols() || k - count + 1 < 0) {
    throw IndexError("window of " + std::to_string(count) + " samples ending at k=" +
                     std::to_string(k) + " outside signal of length " +
                     std::to_string(signal.cols()));
  }
  const Index dim = signal.rows();
  Vector out(dim * count);
  for (Index j = 0; j < count; ++j) out.segment(j * dim, dim) = signal.col(k - j);
  return out;
}

StackedWindow make_window(const IoDataset& data, Index k, Index n) {
  if (n < 0) throw IndexError("window length n=" + std::to_string(n) + " must be >= 0");
  if (k >= data.size()) {
    throw IndexError("k=" + std::to_string(k) + " must be < N=" + std::to_string(data.size()));
  }
  if (k < n) {
    throw IndexError("k=" + std::to_string(k) + " must be >= n=" + std::to_string(n) +
                     " (window would start before sample 0)");
  }
  return StackedWindow{stack_descending(data.y, k, n + 1), stack_descending(data.u, k, n + 1), n};
}

Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * s(0) * 1e-12;
  return (s.array() > tol).count();
}

Matrix observability_matrix(const Matrix& A, const Matrix& C, Index n) {
  const Index ny = C.rows();
  Matrix O(ny * (n + 1), A.cols());
  Matrix CAj = C;  // C A^j
  for (Index j = 0; j <= n; ++j) {
    O.middleRows((n - j) * ny, ny) = CAj;
    CAj = CAj * A;
  }
  return O;
}

Index observability_rank(const LtiSS& ss, Index n) {
  return numerical_rank(observability_matrix(ss.A, ss.C, n));
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(A, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
  engine_.seed(seq);
}

double RngStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RngStream::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

Index RngStream::uniform_index(Index lo, Index hi_inclusive) {
  return std::uniform_int_distribution<Index>(lo, hi_inclusive)(engine_);
}

Matrix RngStream::normal_matrix(Index rows, Index cols, double stddev) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(engine_);
  return m;
}

Matrix RngStream::uniform_matrix(Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(engine_);
  return m;
}

RngStream RngStream::derive(std::uint64_t sub_id) const {
  // splitmix64 of (stream, sub) keeps children distinct from every top-level stream id
  std::uint64_t z = stream_id_ * 0x9e3779b97f4a7c15ull + sub_id + 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return RngStream(seed_, z);
}

void write_dataset_csv(const IoDataset& data, std::ostream& os) {
  data.validate();
  os << "k";
  for (Index i = 0; i < data.nu(); ++i) os << ",u_" << i;
  for (Index i = 0; i < data.ny(); ++i) os << ",y_" << i;
  if (data.x_true)
    for (Index i = 0; i < data.x_true->rows(); ++i) os << ",x_" << i;
  if (data.e_true)
    for (Index i = 0; i < data.e_true->rows(); ++i) os << ",e_" << i;
  os << '\n';
  for (Index k = 0; k < data.size(); ++k) {
    os << k;
    for (Index i = 0; i < data.nu(); ++i) os << ',' << detail::format_double(data.u(i, k));
    for (Index i = 0; i < data.ny(); ++i) os << ',' << detail::format_double(data.y(i, k));
    if (data.x_true)
      for (Index i = 0; i < data.x_true->rows(); ++i)
        os << ',' << detail::format_double((*data.x_true)(i, k));
    if (data.e_true)
      for (Index i = 0; i < data.e_true->rows(); ++i)
        os << ',' << detail::format_double((*data.e_true)(i, k));
    os << '\n';
  }
}

IoDataset read_dataset_csv(std::istream& is, double ts) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("dataset CSV is empty");
  const auto header = detail::split(detail::trim(line));
  if (header.empty() || header[0] != "k") throw IoError("dataset CSV header must start with 'k'");

  Index nu = 0, ny = 0, nx = 0, ne = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    const char kind = h.empty() ? '?' : h[0];
    // columns must appear grouped in u, y, x, e order
    const bool ordered = (kind == 'u' && ny + nx + ne == 0) || (kind == 'y' && nx + ne == 0) ||
                         (kind == 'x' && ne == 0) || kind == 'e';
    if (h.size() < 3 || h[1] != '_' || !ordered) throw IoError("unexpected dataset column '" + h + "'");
    switch (kind) {
      case 'u': ++nu; break;
      case 'y': ++ny; break;
      case 'x': ++nx; break;
      case 'e': ++ne; break;
      default: throw IoError("unexpected dataset column '" + h + "'");
    }
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split(line);
    if (cells.size() != header.size()) {
      throw IoError("dataset row " + std::to_string(rows.size()) + " has " +
                    std::to_string(cells.size()) + " columns, expected " +
                    std::to_string(header.size()));
    }
    std::vector<double> row(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) row[c - 1] = detail::parse_double(cells[c], "dataset CSV");
    rows.push_back(std::move(row));
  }

  const auto N = static_cast<Index>(rows.size());
  IoDataset data;
  data.ts = ts;
  data.u.resize(nu, N);
  data.y.resize(ny, N);
  if (nx > 0) data.x_true = Matrix(nx, N);
  if (ne > 0) data.e_true = Matrix(ne, N);
  for (Index k = 0; k < N; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    Index c = 0;
    for (Index i = 0; i < nu; ++i) data.u(i, k) = r[c++];
    for (Index i = 0; i < ny; ++i) data.y(i, k) = r[c++];
    for (Index i = 0; i < nx; ++i) (*data.x_true)(i, k) = r[c++];
    for (Index i = 0; i < ne; ++i) (*data.e_true)(i, k) = r[c++];
  }
  data.validate();
  return data;
}

void save_dataset(const IoDataset& data, const std::string& path) {
  auto os = detail::open_out(path);
  write_dataset_csv(data, os);
}

IoDataset load_dataset(const std::string& path, double ts) {
  auto is = detail::open_in(path);
  return read_dataset_csv(is, ts);
}

}  // namespace encinit
