#include "tracemin/oracle.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tracemin::oracle {

std::string to_string(SpectrumSource s) {
  return s == SpectrumSource::dense_ed ? "dense_ed" : "morse_analytic";
}

namespace {

std::vector<double> dense_lowest(const CMatrix& m, std::size_t k) {
  const auto n = static_cast<lapack_int>(m.rows());
  const auto kk = static_cast<lapack_int>(k);
  lapack_int found = 0;
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  const bool real = m.imag().cwiseAbs().maxCoeff() == 0.0;
  lapack_int info = 0;
  if (real) {
    Eigen::MatrixXd a = m.real();
    info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, kk, 0.0,
                          &found, w.data(), nullptr, 1, support.data());
  } else {
    CMatrix a = m;
    info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'N', 'I', 'U', n,
                          reinterpret_cast<lapack_complex_double*>(a.data()), n, 0.0, 0.0, 1, kk,
                          0.0, &found, w.data(), nullptr, 1, support.data());
  }
  if (info != 0 || found != kk) {
    throw Error(fmt::format("dense eigensolver failed (info {}, found {})", info, found));
  }
  w.resize(k);
  return w;
}

std::vector<double> tridiagonal_lowest(const GridOperator& g, std::size_t k) {
  const auto n = static_cast<lapack_int>(g.dim());
  std::vector<double> d(g.dim());
  std::vector<double> e(g.dim(), -g.kinetic_coeff);
  for (std::size_t i = 0; i < g.dim(); ++i) d[i] = 2.0 * g.kinetic_coeff + g.potential[i];
  std::vector<double> w(g.dim());
  std::vector<lapack_int> support(2 * g.dim());
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, 'N', 'I', n, d.data(), e.data(), 0.0, 0.0, 1,
                     static_cast<lapack_int>(k), 0.0, &found, w.data(), nullptr, 1, support.data());
  if (info != 0 || found != static_cast<lapack_int>(k)) {
    throw Error(fmt::format("tridiagonal eigensolver failed (info {})", info));
  }
  w.resize(k);
  return w;
}

}  // namespace

ExactSpectrum exact_spectrum(const Operator& h, std::size_t k) {
  const std::size_t d = hamiltonian::dim(h);
  if (d > kMaxDenseDim) {
    throw TooLarge(fmt::format("dense diagonalization of dimension {} exceeds 2^14", d));
  }
  if (k == 0 || k > d) throw LengthMismatch(fmt::format("cannot take {} levels of {}", k, d));
  ExactSpectrum out;
  out.dim = d;
  out.source = SpectrumSource::dense_ed;
  if (const auto* g = std::get_if<GridOperator>(&h)) {
    out.energies = tridiagonal_lowest(*g, k);
  } else {
    out.energies = dense_lowest(hamiltonian::to_dense(h), k);
  }
  return out;
}

namespace {

// Number of eigenvalues below lambda. With r_i = pivot_i / c the LDL^T
// recurrence reads r_i = 2 + w_i - 1/r_{i-1}, w_i = (V_i - lambda) / c;
// substituting r_i = 1 + u_i gives u_i = w_i + u_{i-1} / (1 + u_{i-1}),
// which has no cancellation against the large kinetic diagonal.
std::size_t count_below(const GridOperator& g, long double lambda) {
  const long double c = g.kinetic_coeff;
  std::size_t count = 0;
  long double u = 0.0L;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const long double w = (static_cast<long double>(g.potential[i]) - lambda) / c;
    if (i == 0) {
      u = 1.0L + w;
    } else {
      long double r_prev = 1.0L + u;
      if (r_prev == 0.0L) r_prev = std::numeric_limits<long double>::epsilon() * 1e-3L;
      u = w + u / r_prev;
    }
    if (1.0L + u < 0.0L) ++count;
  }
  return count;
}

}  // namespace

std::vector<double> grid_lowest_eigenvalues(const GridOperator& g, std::size_t k) {
  if (k == 0 || k > g.dim()) throw LengthMismatch("invalid number of grid levels");
  const auto [vmin, vmax] = std::minmax_element(g.potential.begin(), g.potential.end());
  std::vector<double> out;
  out.reserve(k);
  for (std::size_t level = 0; level < k; ++level) {
    // Gershgorin interval.
    long double lo = *vmin;
    long double hi = *vmax + 4.0L * g.kinetic_coeff;
    for (int it = 0; it < 200; ++it) {
      const long double mid = 0.5L * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(g, mid) > level) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    out.push_back(static_cast<double>(0.5L * (lo + hi)));
  }
  return out;
}

double morse_omega(double de, double am, double mu) {
  if (!(de > 0.0 && am > 0.0 && mu > 0.0)) throw NotBound("Morse parameters must be positive");
  return 2.0 * am * std::sqrt(de * hamiltonian::hbar2_over_2amu() / mu);
}

std::size_t morse_max_level(double de, double am, double mu) {
  const double x = 2.0 * de / morse_omega(de, am, mu) - 0.5;
  if (x < 0.0) throw NotBound("Morse well supports no bound level");
  // Guard the integer edge against rounding in 2 D_e / omega.
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

double morse_analytic(std::size_t n, double de, double am, double mu) {
  const std::size_t max_n = morse_max_level(de, am, mu);
  if (n > max_n) {
    throw NotBound(fmt::format("level {} exceeds the highest bound level {}", n, max_n));
  }
  const double w = morse_omega(de, am, mu) * (static_cast<double>(n) + 0.5);
  return w - w * w / (4.0 * de);
}

ExactSpectrum morse_spectrum(std::size_t k, const MorseParams& p) {
  ExactSpectrum out;
  out.source = SpectrumSource::morse_analytic;
  for (std::size_t n = 0; n < k; ++n) out.energies.push_back(morse_analytic(n, p.de, p.am, p.mu));
  out.dim = k;
  return out;
}

Variance energy_variance(const Operator& h, const DenseState& psi) {
  if (static_cast<std::size_t>(psi.size()) != hamiltonian::dim(h)) {
    throw DimensionMismatch("energy_variance: state dimension differs from operator");
  }
  const double norm2 = psi.squaredNorm();
  if (!(norm2 > 0.0)) throw DimensionMismatch("energy_variance: zero state");
  const DenseState phi = psi / std::sqrt(norm2);
  const DenseState hphi = hamiltonian::apply(h, phi);
  Variance v;
  v.energy = phi.dot(hphi).real();
  v.variance = (hphi - v.energy * phi).squaredNorm();
  v.relative = v.energy != 0.0 ? v.variance / (v.energy * v.energy)
                               : std::numeric_limits<double>::infinity();
  return v;
}

RitzAudit ritz_audit(std::span<const double> ritz, const ExactSpectrum& exact, double tol) {
  if (ritz.size() > exact.energies.size()) {
    throw LengthMismatch(fmt::format("{} Ritz values but only {} exact levels", ritz.size(),
                                     exact.energies.size()));
  }
  RitzAudit out;
  for (std::size_t k = 0; k < ritz.size(); ++k) {
    RitzAuditEntry e;
    e.index = k;
    e.ritz = ritz[k];
    e.exact = exact.energies[k];
    e.margin = e.ritz - e.exact;
    e.violation = e.margin < -tol;
    out.violations += e.violation ? 1 : 0;
    out.entries.push_back(e);
  }
  return out;
}

LinearFit error_scaling_fit(std::span<const double> rel_errors) {
  const std::size_t n = rel_errors.size();
  if (n < 3) throw TooFewPoints(fmt::format("error fit needs at least 3 points, got {}", n));
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += static_cast<double>(i + 1);
    my += rel_errors[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i + 1) - mx;
    const double dy = rel_errors[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rel_errors[i] - (f.intercept + f.slope * static_cast<double>(i + 1));
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

}  // namespace tracemin::oracle
