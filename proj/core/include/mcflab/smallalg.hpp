#pragma once

// Pointwise linear algebra for graph geometry: the differential du at one
// node, its singular values, the induced metric and volume element, and the
// area-decreasing spectral functions built from them.

#include <array>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>

namespace mcflab {

/// Largest domain dimension or codimension handled by the pointwise kernels.
inline constexpr int kMaxDim = 4;
/// Number of unordered pairs i<j for kMaxDim.
inline constexpr int kMaxPairs = kMaxDim * (kMaxDim - 1) / 2;

/// Dense row-major matrix with fixed capacity kMaxDim x kMaxDim.
class SmallMatrix {
 public:
  SmallMatrix() = default;
  SmallMatrix(int rows, int cols);

  static SmallMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r * kMaxDim + c)]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r * kMaxDim + c)]; }

  SmallMatrix transpose() const;
  double frobenius_norm() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::array<double, kMaxDim * kMaxDim> data_{};
};

SmallMatrix operator*(const SmallMatrix& a, const SmallMatrix& b);
SmallMatrix operator-(const SmallMatrix& a, const SmallMatrix& b);

/// The m x n differential du at a point: row alpha is the codomain index,
/// column i the domain index, entry (alpha, i) = d u^alpha / d x^i.
class Jacobian {
 public:
  Jacobian() = default;
  Jacobian(int codim, int dim);
  explicit Jacobian(const SmallMatrix& entries);

  static Jacobian from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int codim() const { return entries_.rows(); }
  int dim() const { return entries_.cols(); }

  double& operator()(int alpha, int i) { return entries_(alpha, i); }
  double operator()(int alpha, int i) const { return entries_(alpha, i); }

  const SmallMatrix& matrix() const { return entries_; }
  bool finite() const;

  /// (du)^T du, the n x n Gram matrix.
  SmallMatrix gram() const;

 private:
  SmallMatrix entries_;
};

struct SymmetricEigen {
  int n = 0;
  std::array<double, kMaxDim> values{};
  SmallMatrix vectors;  // column k is the eigenvector of values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for a small symmetric matrix. Iterates until
/// the off-diagonal Frobenius norm is <= 1e-14 * ||A||_F. Eigenpairs are
/// returned in the order the rotations leave them (unsorted).
SymmetricEigen jacobi_eigen(const SmallMatrix& symmetric);

/// Singular values of du sorted descending; ties keep a stable order.
struct SingularSpectrum {
  int n = 0;
  std::array<double, kMaxDim> lambdas{};

  std::span<const double> values() const { return {lambdas.data(), static_cast<std::size_t>(n)}; }
  double largest() const { return n > 0 ? lambdas[0] : 0.0; }
};

SingularSpectrum singular_spectrum(const Jacobian& jac);

/// Spectrum together with orthonormal right singular vectors (columns of
/// `right`, n x n) and left singular vectors (columns of `left`, m x n; a
/// column is zero where the singular value vanishes).
struct SingularFrame {
  SingularSpectrum spectrum;
  SmallMatrix right;
  SmallMatrix left;
};

SingularFrame singular_frame(const Jacobian& jac);

struct PointGeometry {
  SmallMatrix metric;          // g = I + (du)^T du
  SmallMatrix inverse_metric;  // g^{-1}
  double volume = 1.0;         // v = sqrt(det g)
  double volume_root = 1.0;    // w = v^{1/n}
  double du_norm = 0.0;        // |du| = sqrt(tr((du)^T du))
};

PointGeometry point_geometry(const Jacobian& jac);

struct AreaDecreasingReport {
  int n = 0;
  std::array<double, kMaxDim> s_eigs{};    // S_ii = (1 - l_i^2)/(1 + l_i^2)
  std::array<double, kMaxPairs> s2_eigs{};  // S_ii + S_jj over pairs i<j, lexicographic
  int pair_count = 0;
  std::optional<double> phi;  // empty when some pair sum <= kPairSumFloor
  double margin = 1.0;        // min over pairs of 1 - l_i l_j (1 when n == 1)

  bool phi_defined() const { return phi.has_value(); }
  /// log det S^[2] = sum of log pair sums; meaningful only when phi is defined.
  double log_det_s2() const;
};

/// Pair sums at or below this floor are treated as the boundary of the
/// area-decreasing set and leave phi undefined.
inline constexpr double kPairSumFloor = 1e-15;

AreaDecreasingReport area_decreasing_report(const SingularSpectrum& spectrum);

/// Index of pair (i, j), i < j, in the lexicographic pair ordering.
int pair_index(int n, int i, int j);

/// Upper bound on l_i^2 l_j^2 implied by phi <= c0. Throws
/// std::invalid_argument for c0 < 1.
double phi_bound_to_pair_bound(double c0);

struct CalcLemmaValue {
  double h_value = 0.0;
  double s_star = 0.0;
};

/// h(s) = (m k s^2 - 4 s - k)/(1 + s^2) and its unique critical point s_*
/// on [0, inf). Throws std::invalid_argument unless k in (0, 1], m >= 1, s >= 0.
CalcLemmaValue calc_lemma_main(double s, double kappa, int m);

/// (s - c)^2 / (1 + s^2); non-decreasing on [c, inf). Throws for c < 0.
double calc_lemma_mss(double s, double c);

}  // namespace mcflab
