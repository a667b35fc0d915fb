#include "mcflab/smallalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mcflab {

namespace {

void check_shape(int rows, int cols) {
  if (rows < 0 || cols < 0 || rows > kMaxDim || cols > kMaxDim) {
    throw std::invalid_argument("matrix shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " exceeds the supported size " + std::to_string(kMaxDim));
  }
}

// Descending order of values[0..n), stable for ties.
std::array<int, kMaxDim> descending_order(const std::array<double, kMaxDim>& values, int n) {
  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + n, 0);
  std::stable_sort(order.begin(), order.begin() + n,
                   [&](int a, int b) { return values[a] > values[b]; });
  return order;
}

}  // namespace

SmallMatrix::SmallMatrix(int rows, int cols) : rows_(rows), cols_(cols) { check_shape(rows, cols); }

SmallMatrix SmallMatrix::identity(int n) {
  SmallMatrix id(n, n);
  for (int i = 0; i < n; ++i) id(i, i) = 1.0;
  return id;
}

SmallMatrix SmallMatrix::transpose() const {
  SmallMatrix t(cols_, rows_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double SmallMatrix::frobenius_norm() const {
  double s = 0.0;
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) s += (*this)(r, c) * (*this)(r, c);
  return std::sqrt(s);
}

SmallMatrix operator*(const SmallMatrix& a, const SmallMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product shape mismatch");
  SmallMatrix out(a.rows(), b.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < b.cols(); ++c) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a(r, k) * b(k, c);
      out(r, c) = s;
    }
  return out;
}

SmallMatrix operator-(const SmallMatrix& a, const SmallMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix difference shape mismatch");
  SmallMatrix out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) - b(r, c);
  return out;
}

Jacobian::Jacobian(int codim, int dim) : entries_(codim, dim) {
  if (codim < 1 || dim < 1) throw std::invalid_argument("Jacobian needs codim >= 1 and dim >= 1");
}

Jacobian::Jacobian(const SmallMatrix& entries) : entries_(entries) {
  if (entries.rows() < 1 || entries.cols() < 1) throw std::invalid_argument("Jacobian needs codim >= 1 and dim >= 1");
}

Jacobian Jacobian::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int m = static_cast<int>(rows.size());
  const int n = m > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Jacobian jac(m, n);
  int a = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("ragged Jacobian rows");
    int i = 0;
    for (double x : row) jac(a, i++) = x;
    ++a;
  }
  return jac;
}

bool Jacobian::finite() const {
  for (int a = 0; a < codim(); ++a)
    for (int i = 0; i < dim(); ++i)
      if (!std::isfinite(entries_(a, i))) return false;
  return true;
}

SmallMatrix Jacobian::gram() const {
  const int n = dim();
  SmallMatrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int a = 0; a < codim(); ++a) s += entries_(a, i) * entries_(a, j);
      g(i, j) = s;
      g(j, i) = s;
    }
  return g;
}

SymmetricEigen jacobi_eigen(const SmallMatrix& symmetric) {
  if (symmetric.rows() != symmetric.cols()) throw std::invalid_argument("jacobi_eigen needs a square matrix");
  const int n = symmetric.rows();
  SmallMatrix a = symmetric;
  SymmetricEigen out;
  out.n = n;
  out.vectors = SmallMatrix::identity(n);

  const double tol = 1e-14 * a.frobenius_norm();
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        if (p != q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol) break;
    out.sweeps = sweep + 1;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = out.vectors(k, p);
          const double vkq = out.vectors(k, q);
          out.vectors(k, p) = c * vkp - s * vkq;
          out.vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  for (int k = 0; k < n; ++k) out.values[k] = a(k, k);
  return out;
}

SingularSpectrum singular_spectrum(const Jacobian& jac) { return singular_frame(jac).spectrum; }

SingularFrame singular_frame(const Jacobian& jac) {
  const int n = jac.dim();
  const int m = jac.codim();
  const SymmetricEigen eig = jacobi_eigen(jac.gram());

  std::array<double, kMaxDim> roots{};
  for (int k = 0; k < n; ++k) roots[k] = std::sqrt(std::max(0.0, eig.values[k]));
  const auto order = descending_order(roots, n);

  SingularFrame frame;
  frame.spectrum.n = n;
  frame.right = SmallMatrix(n, n);
  frame.left = SmallMatrix(m, n);
  const double cutoff = 1e-12 * (1.0 + jac.matrix().frobenius_norm());
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    const double lambda = roots[src];
    frame.spectrum.lambdas[k] = lambda;
    for (int i = 0; i < n; ++i) frame.right(i, k) = eig.vectors(i, src);
    if (lambda > cutoff && k < m) {
      for (int a = 0; a < m; ++a) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += jac(a, i) * eig.vectors(i, src);
        frame.left(a, k) = s / lambda;
      }
    }
  }
  if (m < n) {
    // Rank <= m: take the nonzero values from the m x m matrix du (du)^T,
    // whose spectrum avoids the sqrt(eps) floor of the zero eigenvalues.
    const SmallMatrix outer = jac.matrix() * jac.matrix().transpose();
    const SymmetricEigen small = jacobi_eigen(outer);
    std::array<double, kMaxDim> vals{};
    for (int k = 0; k < m; ++k) vals[k] = std::sqrt(std::max(0.0, small.values[k]));
    std::sort(vals.begin(), vals.begin() + m, std::greater<>());
    for (int k = 0; k < n; ++k) frame.spectrum.lambdas[k] = k < m ? vals[k] : 0.0;
  }
  return frame;
}

PointGeometry point_geometry(const Jacobian& jac) {
  const int n = jac.dim();
  PointGeometry geo;
  geo.metric = jac.gram();
  for (int i = 0; i < n; ++i) geo.metric(i, i) += 1.0;

  // Cholesky g = L L^T; g is SPD with eigenvalues >= 1.
  SmallMatrix low(n, n);
  for (int j = 0; j < n; ++j) {
    double d = geo.metric(j, j);
    for (int k = 0; k < j; ++k) d -= low(j, k) * low(j, k);
    low(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = geo.metric(i, j);
      for (int k = 0; k < j; ++k) s -= low(i, k) * low(j, k);
      low(i, j) = s / low(j, j);
    }
  }
  double v = 1.0;
  for (int i = 0; i < n; ++i) v *= low(i, i);
  geo.volume = v;
  geo.volume_root = std::pow(v, 1.0 / n);

  // Columns of g^{-1} by forward/back substitution against unit vectors.
  geo.inverse_metric = SmallMatrix(n, n);
  for (int col = 0; col < n; ++col) {
    std::array<double, kMaxDim> y{};
    for (int i = 0; i < n; ++i) {
      double s = (i == col) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) s -= low(i, k) * y[k];
      y[i] = s / low(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int k = i + 1; k < n; ++k) s -= low(k, i) * geo.inverse_metric(k, col);
      geo.inverse_metric(i, col) = s / low(i, i);
    }
  }
  // Symmetrize away rounding asymmetry.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double s = 0.5 * (geo.inverse_metric(i, j) + geo.inverse_metric(j, i));
      geo.inverse_metric(i, j) = s;
      geo.inverse_metric(j, i) = s;
    }

  geo.du_norm = jac.matrix().frobenius_norm();
  return geo;
}

int pair_index(int n, int i, int j) {
  if (!(0 <= i && i < j && j < n)) throw std::invalid_argument("pair_index needs 0 <= i < j < n");
  // Pairs before row i: sum_{r<i} (n - 1 - r).
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

double AreaDecreasingReport::log_det_s2() const {
  double s = 0.0;
  for (int k = 0; k < pair_count; ++k) s += std::log(s2_eigs[k]);
  return s;
}

AreaDecreasingReport area_decreasing_report(const SingularSpectrum& spectrum) {
  const int n = spectrum.n;
  AreaDecreasingReport rep;
  rep.n = n;
  std::array<double, kMaxDim> sq{};
  for (int i = 0; i < n; ++i) {
    const double l = spectrum.lambdas[i];
    sq[i] = l * l;
    rep.s_eigs[i] = (1.0 - l * l) / (1.0 + l * l);
  }

  bool defined = true;
  double margin = 1.0;
  double log_sum = 0.0;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      const double li2 = sq[i];
      const double lj2 = sq[j];
      const double s2 = 2.0 * (1.0 - li2 * lj2) / ((1.0 + li2) * (1.0 + lj2));
      rep.s2_eigs[k] = s2;
      margin = std::min(margin, 1.0 - spectrum.lambdas[i] * spectrum.lambdas[j]);
      if (s2 <= kPairSumFloor) {
        defined = false;
      } else {
        log_sum += std::log(s2);
      }
    }
  }
  rep.pair_count = k;
  rep.margin = margin;
  if (defined) {
    rep.phi = 1.0 + 0.5 * n * (n - 1) * std::log(2.0) - log_sum;
  }
  return rep;
}

double phi_bound_to_pair_bound(double c0) {
  if (!(c0 >= 1.0)) throw std::invalid_argument("phi bound must be >= 1 (phi >= 1 always)");
  return -std::expm1(1.0 - c0);
}

CalcLemmaValue calc_lemma_main(double s, double kappa, int m) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw std::invalid_argument("kappa must lie in (0, 1]");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (!(s >= 0.0)) throw std::invalid_argument("s must be >= 0");
  CalcLemmaValue out;
  out.h_value = (m * kappa * s * s - 4.0 * s - kappa) / (1.0 + s * s);
  const double km = kappa * (m + 1);
  out.s_star = (std::sqrt(km * km + 16.0) - km) / 4.0;
  return out;
}

double calc_lemma_mss(double s, double c) {
  if (!(c >= 0.0)) throw std::invalid_argument("c must be >= 0");
  if (!(s >= 0.0)) throw std::invalid_argument("s must be >= 0");
  return (s - c) * (s - c) / (1.0 + s * s);
}

}  // namespace mcflab
