#include "test_util.hpp"

#include "tracemin/errors.hpp"
#include "tracemin/linalg.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tracemin;
using linalg::HermitianMatrix;
using testutil::random_hermitian;
using testutil::random_matrix;
using testutil::random_spd;

namespace {

HermitianMatrix herm(const CMatrix& m) { return HermitianMatrix::from_entries(m); }

CMatrix real2(double a, double b, double c, double d) {
  CMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(HermitianMatrix, RejectsNonHermitianInput) {
  EXPECT_THROW(herm(real2(1, 2, 3, 1)), ShapeMismatch);
  CMatrix m = real2(1, 0, 0, 1);
  m(0, 0) = cplx(1.0, 1e-3);
  EXPECT_THROW(herm(m), ShapeMismatch);
  EXPECT_THROW(herm(CMatrix::Zero(2, 3)), DimensionMismatch);
}

TEST(HermitianMatrix, MirrorsAfterValidation) {
  CMatrix m = real2(1, 2, 2, 5);
  m(1, 0) += 1e-14;
  const auto h = herm(m);
  EXPECT_EQ(h(1, 0), std::conj(h(0, 1)));
}

TEST(Cholesky, IdentityAndDiagonal) {
  const auto id = linalg::cholesky(HermitianMatrix::identity(2));
  EXPECT_TRUE(id.lower.isApprox(CMatrix::Identity(2, 2)));
  const auto d = linalg::cholesky(HermitianMatrix::diagonal({4.0, 9.0}));
  EXPECT_NEAR(std::abs(d.lower(0, 0) - 2.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.lower(1, 1) - 3.0), 0.0, 1e-15);
  EXPECT_EQ(d.lower(1, 0), cplx(0.0));
}

TEST(Cholesky, ReconstructsTwoByTwo) {
  const CMatrix s = real2(2, 1, 1, 2);
  const auto f = linalg::cholesky(herm(s));
  EXPECT_LT((f.lower * f.lower.adjoint() - s).norm(), 1e-12);
}

TEST(Cholesky, RoundTripOnRandomMatricesUpTo64) {
  auto& g = testutil::rng(1);
  for (Eigen::Index n : {1, 2, 5, 16, 33, 64}) {
    const CMatrix s = random_spd(g, n);
    const auto f = linalg::cholesky(herm(s));
    EXPECT_LT((f.lower * f.lower.adjoint() - s).norm() / s.norm(), 1e-12) << n;
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_EQ(f.lower(i, i).imag(), 0.0);
      EXPECT_GT(f.lower(i, i).real(), 0.0);
      for (Eigen::Index j = i + 1; j < n; ++j) EXPECT_EQ(f.lower(i, j), cplx(0.0));
    }
  }
}

TEST(Cholesky, SolveMatchesDenseSolve) {
  auto& g = testutil::rng(2);
  const CMatrix s = random_spd(g, 6);
  const CMatrix b = random_matrix(g, 6, 3);
  const auto f = linalg::cholesky(herm(s));
  EXPECT_LT((s * f.solve(b) - b).norm(), 1e-10);
}

TEST(Cholesky, DuplicatedStateReportsPivot) {
  auto& g = testutil::rng(3);
  CMatrix a = random_matrix(g, 8, 3);
  a.col(2) = a.col(1);
  const CMatrix s = a.adjoint() * a;
  try {
    linalg::cholesky(herm((s + s.adjoint()) / 2.0));
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
}

TEST(Cholesky, JitterRetryLogsWarning) {
  const auto s = herm(real2(1, 1, 1, 1));
  EXPECT_THROW(linalg::cholesky(s, {0.0}, nullptr), NotPositiveDefinite);
  linalg::RegularizationLog log;
  const auto f = linalg::cholesky(s, {1e-8}, &log);
  EXPECT_EQ(log.warnings.size(), 1u);
  const CMatrix shifted = s.matrix() + 1e-8 * CMatrix::Identity(2, 2);
  EXPECT_LT((f.lower * f.lower.adjoint() - shifted).norm(), 1e-12);
}

TEST(Gevp, DiagonalAndPauliX) {
  const auto a = linalg::gevp(HermitianMatrix::diagonal({1.0, 2.0}), HermitianMatrix::identity(2));
  EXPECT_NEAR(a.energies[0], 1.0, 1e-15);
  EXPECT_NEAR(a.energies[1], 2.0, 1e-15);
  EXPECT_NEAR(std::abs(a.coeffs(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(a.coeffs(1, 1)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(a.coeffs(0, 1)), 0.0, 1e-15);

  const auto x = linalg::gevp(herm(real2(0, 1, 1, 0)), HermitianMatrix::identity(2));
  EXPECT_NEAR(x.energies[0], -1.0, 1e-15);
  EXPECT_NEAR(x.energies[1], 1.0, 1e-15);
}

TEST(Gevp, MatchesNonSymmetricEigensolveOfSInvH) {
  auto& g = testutil::rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix h = random_hermitian(g, 4);
    const CMatrix s = random_spd(g, 4);
    const auto r = linalg::gevp(herm(h), herm(s));
    const CMatrix sih = s.fullPivLu().solve(h);
    const auto ref = testutil::sorted_real(Eigen::ComplexEigenSolver<CMatrix>(sih).eigenvalues());
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(r.energies[k], ref[k], 1e-10);
  }
}

TEST(Gevp, CoefficientsAreSOrthonormalAndDiagonalizeH) {
  auto& g = testutil::rng(5);
  const CMatrix h = random_hermitian(g, 6);
  const CMatrix s = random_spd(g, 6);
  const auto r = linalg::gevp(herm(h), herm(s));
  EXPECT_TRUE(std::is_sorted(r.energies.begin(), r.energies.end()));
  EXPECT_LT((r.coeffs.adjoint() * s * r.coeffs - CMatrix::Identity(6, 6)).norm(), 1e-8);
  CMatrix d = CMatrix::Zero(6, 6);
  for (int k = 0; k < 6; ++k) d(k, k) = r.energies[k];
  EXPECT_LT((r.coeffs.adjoint() * h * r.coeffs - d).norm(), 1e-8);
  EXPECT_GE(r.condition_s, 1.0);
}

TEST(Gevp, DimensionMismatch) {
  EXPECT_THROW(linalg::gevp(HermitianMatrix::identity(2), HermitianMatrix::identity(3)),
               DimensionMismatch);
}

TEST(Gevp, InvariantUnderBasisChange) {
  auto& g = testutil::rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix h = random_hermitian(g, 5);
    const CMatrix s = random_spd(g, 5);
    const CMatrix m = random_matrix(g, 5, 5) + 3.0 * CMatrix::Identity(5, 5);
    const auto a = linalg::gevp(herm(h), herm(s));
    const CMatrix h2 = m.adjoint() * h * m;
    const CMatrix s2 = m.adjoint() * s * m;
    const auto b = linalg::gevp(HermitianMatrix::from_upper(h2), HermitianMatrix::from_upper(s2));
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(a.energies[k], b.energies[k], 1e-10);
  }
}

TEST(TraceInvProduct, Examples) {
  EXPECT_NEAR(linalg::trace_inv_product(HermitianMatrix::identity(2),
                                        HermitianMatrix::diagonal({3.0, 5.0})),
              8.0, 1e-15);
  auto& g = testutil::rng(7);
  const CMatrix h = random_hermitian(g, 5);
  const CMatrix s = random_spd(g, 5);
  const double l = linalg::trace_inv_product(herm(s), herm(h));
  EXPECT_NEAR(linalg::trace_inv_product(herm(4.0 * s), herm(4.0 * h)), l, 1e-12);
  const auto e = linalg::gevp(herm(h), herm(s)).energies;
  EXPECT_NEAR(l, std::accumulate(e.begin(), e.end(), 0.0), 1e-10);
}

TEST(ConditionNumber, Examples) {
  EXPECT_DOUBLE_EQ(linalg::condition_number(HermitianMatrix::identity(3)), 1.0);
  EXPECT_NEAR(linalg::condition_number(HermitianMatrix::diagonal({4.0, 1.0})), 4.0, 1e-14);
  const double rho = 1.0 - 1e-6;
  EXPECT_GE(linalg::condition_number(herm(real2(1, rho, rho, 1))), 1e6 * (1 - 1e-9));
  EXPECT_TRUE(std::isinf(linalg::condition_number(herm(real2(1, 1, 1, 1)))));
}

TEST(Eigenvalues, TiesStayStable) {
  const auto e = linalg::eigenvalues(HermitianMatrix::diagonal({2.0, 1.0, 2.0}));
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_EQ(e[1], 2.0);
  EXPECT_EQ(e[2], 2.0);
}
