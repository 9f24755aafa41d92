#pragma once

#include "tracemin/hamiltonian.hpp"

#include <span>
#include <string>
#include <vector>

namespace tracemin::oracle {

using hamiltonian::GridOperator;
using hamiltonian::MorseParams;
using hamiltonian::Operator;

inline constexpr std::size_t kMaxDenseDim = std::size_t{1} << 14;

enum class SpectrumSource { dense_ed, morse_analytic };

std::string to_string(SpectrumSource s);

struct ExactSpectrum {
  std::vector<double> energies;  // ascending, lowest k
  SpectrumSource source = SpectrumSource::dense_ed;
  std::size_t dim = 0;
};

/// Lowest k eigenvalues by dense diagonalization. Pauli sums go through a
/// dense Hermitian (or real symmetric, when the matrix is real) LAPACK
/// solve; grid operators through the tridiagonal solver. Throws TooLarge
/// above 2^14.
ExactSpectrum exact_spectrum(const Operator& h, std::size_t k);

/// Lowest k eigenvalues of a grid operator by Sturm-count bisection, with
/// the pivot recurrence written relative to the kinetic scale so that the
/// result keeps full relative accuracy on fine grids. No size guard.
std::vector<double> grid_lowest_eigenvalues(const GridOperator& g, std::size_t k);

/// omega = 2 a_M sqrt(D_e C / mu) in cm^-1, C = hbar^2 / (2 amu).
double morse_omega(double de, double am, double mu);

/// Largest n with n + 1/2 <= 2 D_e / omega.
std::size_t morse_max_level(double de, double am, double mu);

/// E_n = omega (n + 1/2) - (omega (n + 1/2))^2 / (4 D_e), in cm^-1, measured
/// from the well bottom. Throws NotBound past morse_max_level.
double morse_analytic(std::size_t n, double de, double am, double mu);

ExactSpectrum morse_spectrum(std::size_t k, const MorseParams& p);

struct Variance {
  double energy = 0.0;     // <H>
  double variance = 0.0;   // <H^2> - <H>^2
  double relative = 0.0;   // variance / <H>^2
};

/// Energy variance of the normalized state, evaluated as ||(H - <H>) psi||^2.
Variance energy_variance(const Operator& h, const DenseState& psi);

struct RitzAuditEntry {
  std::size_t index = 0;
  double ritz = 0.0;
  double exact = 0.0;
  double margin = 0.0;  // ritz - exact
  bool violation = false;
};

struct RitzAudit {
  std::vector<RitzAuditEntry> entries;
  std::size_t violations = 0;
  bool clean() const noexcept { return violations == 0; }
};

/// Flags every margin below -tol. Throws LengthMismatch when there are more
/// Ritz values than exact levels.
RitzAudit ritz_audit(std::span<const double> ritz, const ExactSpectrum& exact, double tol);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

/// Ordinary least squares of rel_errors[k-1] against k = 1..n.
LinearFit error_scaling_fit(std::span<const double> rel_errors);

}  // namespace tracemin::oracle
