#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "mcflab/smallalg.hpp"

using namespace mcflab;
using mcflab::testing::Gen;

namespace {

// Eigenvalues of a symmetric 2x2 matrix by bisection on its characteristic
// polynomial, independent of the Jacobi solver.
std::array<double, 2> bisect_eigs(double a, double b, double c) {
  auto p = [&](double mu) { return mu * mu - (a + c) * mu + (a * c - b * b); };
  const double mid = 0.5 * (a + c);
  const double hi = std::abs(a) + std::abs(b) + std::abs(c) + 1.0;
  auto root = [&](double lo, double up) {
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (lo + up);
      if ((p(lo) <= 0.0) == (p(m) <= 0.0)) lo = m;
      else up = m;
    }
    return 0.5 * (lo + up);
  };
  return {root(mid, hi), root(-hi, mid)};
}

Jacobian apply(const SmallMatrix& u, const Jacobian& j, const SmallMatrix& v) {
  return Jacobian(u * j.matrix() * v);
}

}  // namespace

TEST(SingularSpectrum, ZeroMap) {
  const auto s = singular_spectrum(Jacobian(2, 2));
  EXPECT_EQ(s.n, 2);
  EXPECT_EQ(s.lambdas[0], 0.0);
  EXPECT_EQ(s.lambdas[1], 0.0);
}

TEST(SingularSpectrum, Diagonal) {
  const auto s = singular_spectrum(Jacobian::from_rows({{1.0, 0.0}, {0.0, 0.5}}));
  EXPECT_NEAR(s.lambdas[0], 1.0, 1e-14);
  EXPECT_NEAR(s.lambdas[1], 0.5, 1e-14);
}

TEST(SingularSpectrum, MatchesCharacteristicPolynomialOracle) {
  Gen gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Jacobian j = gen.jacobian(3, 2, 2.0);
    const SmallMatrix g = j.gram();
    const auto mu = bisect_eigs(g(0, 0), g(0, 1), g(1, 1));
    const auto s = singular_spectrum(j);
    EXPECT_NEAR(s.lambdas[0], std::sqrt(std::max(mu[0], 0.0)), 1e-10);
    EXPECT_NEAR(s.lambdas[1], std::sqrt(std::max(mu[1], 0.0)), 1e-10);
  }
}

TEST(SingularSpectrum, OrthogonalInvarianceProperty) {
  Gen gen(11);
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = gen.integer(1, kMaxDim);
    const int n = gen.integer(1, kMaxDim);
    const Jacobian j = gen.jacobian(m, n, gen.uniform(0.1, 3.0));
    const auto ref = singular_spectrum(j);
    const auto rot = singular_spectrum(apply(gen.orthogonal(m), j, gen.orthogonal(n)));
    for (int i = 0; i < n; ++i)
      ASSERT_NEAR(ref.lambdas[static_cast<std::size_t>(i)], rot.lambdas[static_cast<std::size_t>(i)], 1e-10)
          << "trial " << trial;
  }
}

TEST(SingularSpectrum, SortedAndNonnegativeProperty) {
  Gen gen(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = gen.integer(1, kMaxDim);
    const auto s = singular_spectrum(gen.jacobian(gen.integer(1, kMaxDim), n, 2.0));
    for (int i = 0; i < n; ++i) {
      EXPECT_GE(s.lambdas[static_cast<std::size_t>(i)], 0.0);
      if (i > 0) EXPECT_GE(s.lambdas[static_cast<std::size_t>(i - 1)], s.lambdas[static_cast<std::size_t>(i)]);
    }
  }
}

TEST(JacobiEigen, ReconstructsMatrixProperty) {
  Gen gen(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = gen.integer(1, kMaxDim);
    SmallMatrix a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) a(r, c) = a(c, r) = gen.uniform(-2.0, 2.0);
    const SymmetricEigen e = jacobi_eigen(a);
    SmallMatrix d(n, n);
    for (int k = 0; k < n; ++k) d(k, k) = e.values[static_cast<std::size_t>(k)];
    const SmallMatrix back = e.vectors * d * e.vectors.transpose();
    EXPECT_LE((back - a).frobenius_norm(), 1e-12 * std::max(1.0, a.frobenius_norm()));
  }
}

TEST(SingularFrame, LeftAndRightVectorsDiagonalize) {
  Gen gen(9);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = gen.integer(1, kMaxDim);
    const int n = gen.integer(1, kMaxDim);
    const Jacobian j = gen.jacobian(m, n, 1.5);
    const SingularFrame f = singular_frame(j);
    const SmallMatrix jv = j.matrix() * f.right;  // columns: l_i * left_i
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < m; ++a)
        EXPECT_NEAR(jv(a, i), f.spectrum.lambdas[static_cast<std::size_t>(i)] * f.left(a, i), 1e-10);
  }
}

TEST(PointGeometry, ZeroMap) {
  const auto g = point_geometry(Jacobian(2, 2));
  EXPECT_EQ(g.volume, 1.0);
  EXPECT_EQ(g.volume_root, 1.0);
  EXPECT_EQ(g.du_norm, 0.0);
  EXPECT_EQ(g.metric(0, 0), 1.0);
  EXPECT_EQ(g.metric(0, 1), 0.0);
}

TEST(PointGeometry, DiagonalSlopes) {
  const auto g = point_geometry(Jacobian::from_rows({{1.0, 0.0}, {0.0, 0.5}}));
  EXPECT_NEAR(g.volume, 1.5811388300841897, 1e-14);
  EXPECT_NEAR(g.volume_root, 1.2574334296829354, 1e-14);
  EXPECT_NEAR(g.inverse_metric(0, 0), 0.5, 1e-15);
}

TEST(PointGeometry, IdentityNorm) {
  EXPECT_NEAR(point_geometry(Jacobian::from_rows({{1.0, 0.0}, {0.0, 1.0}})).du_norm, std::sqrt(2.0), 1e-15);
}

TEST(PointGeometry, VolumeIsProductOverSpectrumProperty) {
  Gen gen(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = gen.integer(1, kMaxDim);
    const Jacobian j = gen.jacobian(gen.integer(1, kMaxDim), n, 2.0);
    const auto s = singular_spectrum(j);
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= std::sqrt(1.0 + s.lambdas[static_cast<std::size_t>(i)] * s.lambdas[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(point_geometry(j).volume, v, 1e-10 * v);
  }
}

TEST(AreaDecreasing, FlatSpectrum) {
  SingularSpectrum s;
  s.n = 2;
  const auto r = area_decreasing_report(s);
  EXPECT_EQ(r.s_eigs[0], 1.0);
  EXPECT_EQ(r.s_eigs[1], 1.0);
  EXPECT_EQ(r.s2_eigs[0], 2.0);
  ASSERT_TRUE(r.phi_defined());
  EXPECT_NEAR(*r.phi, 1.0, 1e-15);
}

TEST(AreaDecreasing, BoundaryLeavesPhiUndefined) {
  SingularSpectrum s;
  s.n = 2;
  s.lambdas = {1.0, 1.0};
  const auto r = area_decreasing_report(s);
  EXPECT_EQ(r.s2_eigs[0], 0.0);
  EXPECT_FALSE(r.phi_defined());
}

TEST(AreaDecreasing, OneAndHalf) {
  SingularSpectrum s;
  s.n = 2;
  s.lambdas = {1.0, 0.5};
  const auto r = area_decreasing_report(s);
  EXPECT_NEAR(r.s_eigs[0], 0.0, 1e-15);
  EXPECT_NEAR(r.s_eigs[1], 0.6, 1e-15);
  EXPECT_NEAR(r.s2_eigs[0], 0.6, 1e-15);
  ASSERT_TRUE(r.phi_defined());
  EXPECT_NEAR(*r.phi, 2.2039728043259360, 1e-13);
  EXPECT_NEAR(r.margin, 0.5, 1e-15);
}

TEST(AreaDecreasing, PhiAtLeastOneProperty) {
  Gen gen(17);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto r = area_decreasing_report(gen.area_decreasing_spectrum(gen.integer(1, kMaxDim)));
    ASSERT_TRUE(r.phi_defined());
    EXPECT_GE(*r.phi, 1.0 - 1e-12);
    EXPECT_GT(r.margin, 0.0);
  }
}

TEST(AreaDecreasing, PhiBoundImpliesPairBoundProperty) {
  Gen gen(19);
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = gen.integer(2, kMaxDim);
    const SingularSpectrum s = gen.area_decreasing_spectrum(n);
    const auto r = area_decreasing_report(s);
    ASSERT_TRUE(r.phi_defined());
    const double bound = phi_bound_to_pair_bound(std::max(1.0, *r.phi));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double p = s.lambdas[static_cast<std::size_t>(i)] * s.lambdas[static_cast<std::size_t>(j)];
        EXPECT_LE(p * p, bound + 1e-12);
      }
  }
}

TEST(AreaDecreasing, PairIndexIsLexicographic) {
  EXPECT_EQ(pair_index(3, 0, 1), 0);
  EXPECT_EQ(pair_index(3, 0, 2), 1);
  EXPECT_EQ(pair_index(3, 1, 2), 2);
  EXPECT_EQ(pair_index(4, 2, 3), 5);
}

TEST(PhiBound, Values) {
  EXPECT_EQ(phi_bound_to_pair_bound(1.0), 0.0);
  EXPECT_NEAR(phi_bound_to_pair_bound(2.0), 0.6321205588285577, 1e-15);
  EXPECT_NEAR(phi_bound_to_pair_bound(5.605170185988091), 0.99, 1e-14);
  EXPECT_THROW(phi_bound_to_pair_bound(0.5), std::invalid_argument);
}

TEST(CalcLemma, CriticalPoint) {
  EXPECT_NEAR(calc_lemma_main(0.3, 1.0, 1).s_star, 0.6180339887498949, 1e-15);
  EXPECT_EQ(calc_lemma_main(0.0, 0.7, 2).h_value, -0.7);
  EXPECT_THROW(calc_lemma_main(0.1, 1.5, 1), std::invalid_argument);
}

TEST(CalcLemma, SlopeSignProperty) {
  Gen gen(23);
  const double d = 1e-6;
  for (int trial = 0; trial < 10000; ++trial) {
    const double kappa = gen.uniform(0.01, 1.0);
    const int m = gen.integer(1, 4);
    const double s = gen.uniform(0.0, 10.0);
    const double star = calc_lemma_main(s, kappa, m).s_star;
    if (std::abs(s - star) < 1e-3 || s < d) continue;
    const double slope = (calc_lemma_main(s + d, kappa, m).h_value - calc_lemma_main(s - d, kappa, m).h_value) / (2 * d);
    if (s < star) EXPECT_LT(slope, 0.0);
    else EXPECT_GT(slope, 0.0);
  }
}

TEST(CalcLemmaMss, Values) {
  EXPECT_DOUBLE_EQ(calc_lemma_mss(1.0, 0.0), 0.5);
  EXPECT_EQ(calc_lemma_mss(2.5, 2.5), 0.0);
  EXPECT_THROW(calc_lemma_mss(1.0, -1.0), std::invalid_argument);
}

TEST(CalcLemmaMss, MonotoneProperty) {
  Gen gen(29);
  for (int trial = 0; trial < 10000; ++trial) {
    const double c = gen.uniform(0.0, 10.0);
    const double s = gen.uniform(c, c + 10.0);
    const double d = 1e-6;
    const double slope = (calc_lemma_mss(s + d, c) - calc_lemma_mss(std::max(c, s - d), c)) / (s + d - std::max(c, s - d));
    EXPECT_GE(slope, -1e-9);
  }
}
