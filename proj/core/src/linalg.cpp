#include "somreplay/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "somreplay/error.hpp"

namespace somreplay {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows, double tol) {
  const std::size_t n = rows.size();
  std::vector<double> dense;
  dense.reserve(n * n);
  for (const auto& r : rows) {
    SOMREPLAY_EXPECTS(r.size() == n, "SymMatrix: rows must form a square matrix");
    dense.insert(dense.end(), r.begin(), r.end());
  }
  *this = from_dense(n, dense, tol);
}

SymMatrix SymMatrix::from_dense(std::size_t dim, std::span<const double> row_major, double tol) {
  SOMREPLAY_EXPECTS(row_major.size() == dim * dim, "SymMatrix: buffer size is not dim*dim");
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      const double a = row_major[i * dim + j];
      const double b = row_major[j * dim + i];
      SOMREPLAY_EXPECTS(std::isfinite(a) && std::isfinite(b), "SymMatrix: non-finite entry");
      if (std::abs(a - b) > tol) {
        std::ostringstream os;
        os << "SymMatrix: asymmetric entry (" << i << ", " << j << "): " << a << " vs " << b;
        throw ContractError(os.str());
      }
      m.set(i, j, i == j ? a : 0.5 * (a + b));
    }
  }
  return m;
}

SymMatrix SymMatrix::identity(std::size_t dim, double scale) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.data_[i * dim + i] = scale;
  return m;
}

double SymMatrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
  return t;
}

bool SymMatrix::is_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

// Applies the Jacobi rotation to the pair (a[i], a[j]) of a row-major buffer.
inline void rotate(std::vector<double>& m, std::size_t i, std::size_t j, double s, double tau) {
  const double g = m[i];
  const double h = m[j];
  m[i] = g - s * (h + g * tau);
  m[j] = h + s * (g - h * tau);
}

}  // namespace

EigenDecomposition eigh(const SymMatrix& input, const JacobiOptions& options) {
  const std::size_t n = input.dim();
  SOMREPLAY_EXPECTS(n > 0, "eigh: empty matrix");
  SOMREPLAY_EXPECTS(input.is_finite(), "eigh: non-finite entry");

  std::vector<double> a(input.data().begin(), input.data().end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  std::vector<double> d(n);
  std::vector<double> b(n);
  std::vector<double> z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = b[i] = a[i * n + i];

  double frob = 0.0;
  for (double x : a) frob += x * x;
  frob = std::sqrt(frob);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
    return std::sqrt(2.0 * s);
  };

  auto finish = [&](int sweeps) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return d[l] > d[r]; });
    EigenDecomposition out;
    out.eigenvalues = Vector(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
      out.eigenvalues[k] = d[order[k]];
      for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v[r * n + order[k]];
    }
    out.sweeps = sweeps;
    return out;
  };

  const double target = options.tolerance * frob;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    if (off_norm() <= target) return finish(sweep - 1);

    double sm = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) sm += std::abs(a[p * n + q]);
    const double thresh = sweep < 4 ? 0.2 * sm / static_cast<double>(n * n) : 0.0;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double& apq = a[p * n + q];
        const double g = 100.0 * std::abs(apq);
        if (sweep > 4 && std::abs(d[p]) + g == std::abs(d[p]) &&
            std::abs(d[q]) + g == std::abs(d[q])) {
          apq = 0.0;
          continue;
        }
        if (std::abs(apq) <= thresh) continue;

        double h = d[q] - d[p];
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        h = t * apq;
        z[p] -= h;
        z[q] += h;
        d[p] -= h;
        d[q] += h;
        apq = 0.0;
        // Only the upper triangle of `a` is maintained.
        for (std::size_t j = 0; j < p; ++j) rotate(a, j * n + p, j * n + q, s, tau);
        for (std::size_t j = p + 1; j < q; ++j) rotate(a, p * n + j, j * n + q, s, tau);
        for (std::size_t j = q + 1; j < n; ++j) rotate(a, p * n + j, q * n + j, s, tau);
        for (std::size_t j = 0; j < n; ++j) rotate(v, j * n + p, j * n + q, s, tau);
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      b[p] += z[p];
      d[p] = b[p];
      z[p] = 0.0;
    }
  }
  const double residual = off_norm();
  if (residual <= target) return finish(options.max_sweeps);
  std::ostringstream os;
  os << "eigh: Jacobi did not converge after " << options.max_sweeps
     << " sweeps; off-diagonal residual " << residual << " (target " << target << ")";
  throw NumericalError(os.str());
}

Matrix cholesky(const SymMatrix& a) {
  const std::size_t n = a.dim();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      std::ostringstream os;
      os << "cholesky: non-positive pivot " << diag << " at index " << j;
      throw NumericalError(os.str());
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SymMatrix reconstruct(const Matrix& q, std::span<const double> values) {
  const std::size_t n = q.rows();
  SOMREPLAY_EXPECTS(q.cols() == n && values.size() == n, "reconstruct: shape mismatch");
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * values[k] * q(j, k);
      out.set(i, j, s);
    }
  }
  return out;
}

SymMatrix regularize_cov(const SymMatrix& cov, double epsilon) {
  SOMREPLAY_EXPECTS(epsilon > 0.0, "regularize_cov: epsilon must be positive");
  const std::size_t n = cov.dim();
  SymMatrix shifted = cov;
  for (std::size_t i = 0; i < n; ++i) shifted.set(i, i, cov(i, i) + epsilon);
  EigenDecomposition eig = eigh(shifted);
  std::vector<double> clamped(eig.eigenvalues.begin(), eig.eigenvalues.end());
  for (double& lam : clamped) lam = std::max(lam, epsilon);
  return reconstruct(eig.eigenvectors, clamped);
}

double orthogonality_error(const Matrix& q) {
  const std::size_t n = q.cols();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < q.rows(); ++k) s += q(k, i) * q(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace somreplay
