#include "tracemin/linalg.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tracemin::linalg {

HermitianMatrix HermitianMatrix::from_entries(const CMatrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(fmt::format("Hermitian matrix must be square and nonempty, got {}x{}",
                                        m.rows(), m.cols()));
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - std::conj(m(j, i))) > tol * scale) {
        throw ShapeMismatch(fmt::format("matrix is not Hermitian at ({}, {})", i, j));
      }
    }
  }
  return from_upper(m);
}

HermitianMatrix HermitianMatrix::from_upper(const CMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(fmt::format("Hermitian matrix must be square and nonempty, got {}x{}",
                                        m.rows(), m.cols()));
  }
  CMatrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out(i, i) = cplx(m(i, i).real(), 0.0);
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) out(j, i) = std::conj(m(i, j));
  }
  return HermitianMatrix(std::move(out));
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  if (dim <= 0) throw DimensionMismatch("identity dimension must be positive");
  return HermitianMatrix(CMatrix::Identity(dim, dim));
}

HermitianMatrix HermitianMatrix::diagonal(const std::vector<double>& d) {
  if (d.empty()) throw DimensionMismatch("diagonal must be nonempty");
  const auto n = static_cast<Eigen::Index>(d.size());
  CMatrix m = CMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
  return HermitianMatrix(std::move(m));
}

CMatrix CholeskyFactor::solve_lower(const CMatrix& b) const {
  return lower.triangularView<Eigen::Lower>().solve(b);
}

CMatrix CholeskyFactor::solve_upper(const CMatrix& b) const {
  return lower.adjoint().triangularView<Eigen::Upper>().solve(b);
}

CMatrix CholeskyFactor::solve(const CMatrix& b) const { return solve_upper(solve_lower(b)); }

CholeskyFactor cholesky(const HermitianMatrix& s) {
  const Eigen::Index n = s.dim();
  const CMatrix& a = s.matrix();
  CMatrix l = CMatrix::Zero(n, n);
  // A pivot below the rounding floor of its diagonal entry is treated as zero.
  constexpr double kFloor = 16.0 * std::numeric_limits<double>::epsilon();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!std::isfinite(d) || d <= kFloor * std::abs(a(j, j).real())) {
      throw NotPositiveDefinite(static_cast<std::size_t>(j), d);
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      cplx v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  return CholeskyFactor{std::move(l)};
}

CholeskyFactor cholesky(const HermitianMatrix& s, const Regularization& reg,
                        RegularizationLog* log) {
  try {
    return cholesky(s);
  } catch (const NotPositiveDefinite& e) {
    if (reg.epsilon <= 0.0) throw;
    const double shift = reg.epsilon * s.trace() / static_cast<double>(s.dim());
    if (log != nullptr) {
      log->warnings.push_back(fmt::format(
          "overlap matrix not positive definite at pivot {}; retried with diagonal shift {}",
          e.pivot(), shift));
    }
    CMatrix shifted = s.matrix();
    shifted.diagonal().array() += shift;
    return cholesky(HermitianMatrix::from_upper(shifted));
  }
}

namespace {

// Eigen already returns ascending order; re-sorting stably pins tie order
// to the solver's output order regardless of future backend changes.
std::vector<Eigen::Index> ascending_order(const RVector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  return order;
}

}  // namespace

RitzSolution gevp(const HermitianMatrix& h, const HermitianMatrix& s, const Regularization& reg,
                  RegularizationLog* log) {
  if (h.dim() != s.dim()) {
    throw DimensionMismatch(fmt::format("gevp: H is {0}x{0} but S is {1}x{1}", h.dim(), s.dim()));
  }
  const CholeskyFactor chol = cholesky(s, reg, log);
  const CMatrix a = chol.solve_lower(h.matrix());
  CMatrix m = chol.solve_lower(a.adjoint()).adjoint();
  m = (0.5 * (m + m.adjoint())).eval();

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(m);
  if (eig.info() != Eigen::Success) throw Error("gevp: Hermitian eigensolver did not converge");

  const auto order = ascending_order(eig.eigenvalues());
  const Eigen::Index n = h.dim();
  RitzSolution out;
  out.energies.reserve(static_cast<std::size_t>(n));
  CMatrix v(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.energies.push_back(eig.eigenvalues()(src));
    v.col(k) = eig.eigenvectors().col(src);
  }
  out.coeffs = chol.solve_upper(v);
  out.condition_s = condition_number(s);
  return out;
}

double trace_inv_product(const HermitianMatrix& s, const HermitianMatrix& h,
                         const Regularization& reg, RegularizationLog* log) {
  if (h.dim() != s.dim()) {
    throw DimensionMismatch(
        fmt::format("trace_inv_product: S is {0}x{0} but H is {1}x{1}", s.dim(), h.dim()));
  }
  const CMatrix x = cholesky(s, reg, log).solve(h.matrix());
  const cplx tr = x.diagonal().sum();
  const double scale = 1.0 + x.diagonal().cwiseAbs().sum();
  if (!std::isfinite(tr.real()) || std::abs(tr.imag()) > 1e-9 * scale) {
    throw Error(fmt::format("trace_inv_product: trace {}+{}i is not real", tr.real(), tr.imag()));
  }
  return tr.real();
}

std::vector<double> eigenvalues(const HermitianMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(m.matrix(), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error("Hermitian eigensolver did not converge");
  std::vector<double> out(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + eig.eigenvalues().size());
  std::sort(out.begin(), out.end());
  return out;
}

double condition_number(const HermitianMatrix& s) {
  const auto ev = eigenvalues(s);
  if (!(ev.front() > 0.0)) return std::numeric_limits<double>::infinity();
  return ev.back() / ev.front();
}

}  // namespace tracemin::linalg
