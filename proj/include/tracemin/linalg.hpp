#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace tracemin {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace linalg {

/// Square complex matrix that is Hermitian by construction.
///
/// The stored entries are always exactly Hermitian: construction either
/// validates the input against a tolerance and then mirrors the upper
/// triangle, or symmetrizes explicitly.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  /// Validates Hermiticity to `tol` relative to the largest entry, then
  /// stores the mirrored upper triangle. Throws DimensionMismatch or Error.
  static HermitianMatrix from_entries(const CMatrix& m, double tol = 1e-12);

  /// Builds from the upper triangle of `m` (lower triangle ignored).
  static HermitianMatrix from_upper(const CMatrix& m);

  static HermitianMatrix identity(Eigen::Index dim);
  static HermitianMatrix diagonal(const std::vector<double>& d);

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const CMatrix& matrix() const noexcept { return m_; }
  cplx operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  double trace() const { return m_.diagonal().real().sum(); }

 private:
  explicit HermitianMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

/// Lower-triangular L with S = L L^H and a real positive diagonal.
struct CholeskyFactor {
  CMatrix lower;

  Eigen::Index dim() const noexcept { return lower.rows(); }

  /// Solves S X = B.
  CMatrix solve(const CMatrix& b) const;
  /// Solves L X = B.
  CMatrix solve_lower(const CMatrix& b) const;
  /// Solves L^H X = B.
  CMatrix solve_upper(const CMatrix& b) const;
};

struct RitzSolution {
  std::vector<double> energies;  // ascending
  CMatrix coeffs;                // column a is c_a, S-orthonormal
  double condition_s = 1.0;
};

/// Diagonal shift applied when S fails to factorize. `epsilon` scales the
/// mean diagonal of S; zero disables the retry.
struct Regularization {
  double epsilon = 0.0;
};

/// Record of a jitter retry; empty unless a retry happened.
struct RegularizationLog {
  std::vector<std::string> warnings;
};

CholeskyFactor cholesky(const HermitianMatrix& s);

/// cholesky() with one retry on S + eps*Tr(S)/n * I when `reg.epsilon > 0`.
CholeskyFactor cholesky(const HermitianMatrix& s, const Regularization& reg,
                        RegularizationLog* log);

/// Solves H c = E S c through the Cholesky reduction L^{-1} H L^{-H}.
RitzSolution gevp(const HermitianMatrix& h, const HermitianMatrix& s,
                  const Regularization& reg = {}, RegularizationLog* log = nullptr);

/// Tr(S^{-1} H), evaluated with Cholesky solves.
double trace_inv_product(const HermitianMatrix& s, const HermitianMatrix& h,
                         const Regularization& reg = {}, RegularizationLog* log = nullptr);

/// Ratio of extreme eigenvalues; +inf when the smallest is not positive.
double condition_number(const HermitianMatrix& s);

/// Ascending eigenvalues of a Hermitian matrix.
std::vector<double> eigenvalues(const HermitianMatrix& m);

}  // namespace linalg
}  // namespace tracemin
