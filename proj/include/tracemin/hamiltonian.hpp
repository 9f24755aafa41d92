#pragma once

#include "tracemin/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tracemin {

/// Amplitude vector of length 2^N. Site 0 is the most significant bit of
/// the amplitude index. No normalization is implied.
using DenseState = CVector;

namespace hamiltonian {

inline constexpr std::size_t kMaxSites = 62;

/// hbar^2 / (2 * 1 amu) in cm^-1 * Angstrom^2, from CODATA 2018 values.
double hbar2_over_2amu();

/// Weighted tensor product of single-site Pauli operators. Stored as
/// X/Z bitmasks with bit (n-1-site) for `site`, so the masks act directly
/// on amplitude indices.
class PauliString {
 public:
  PauliString() = default;
  /// `word` over {I, X, Y, Z}, site 0 first. Throws InvalidSize on bad input.
  PauliString(cplx coeff, std::string_view word);
  PauliString(cplx coeff, std::size_t n_sites, std::uint64_t x_mask, std::uint64_t z_mask);

  static PauliString identity(std::size_t n_sites, cplx coeff = 1.0);
  /// Single-site operator `op` ('X', 'Y' or 'Z') at `site`.
  static PauliString single(std::size_t n_sites, std::size_t site, char op, cplx coeff = 1.0);

  cplx coeff() const noexcept { return coeff_; }
  void set_coeff(cplx c) noexcept { coeff_ = c; }
  std::size_t n_sites() const noexcept { return n_; }
  std::uint64_t x_mask() const noexcept { return x_; }
  std::uint64_t z_mask() const noexcept { return z_; }
  char op(std::size_t site) const;
  std::string word() const;
  int y_count() const noexcept;

  bool same_ops(const PauliString& o) const noexcept {
    return n_ == o.n_ && x_ == o.x_ && z_ == o.z_;
  }

  /// Operator product, coefficients and the Pauli phase included.
  friend PauliString operator*(const PauliString& a, const PauliString& b);

 private:
  cplx coeff_{1.0, 0.0};
  std::size_t n_ = 0;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
};

/// Canonical list of Pauli strings: no duplicated patterns, no zero terms,
/// deterministic order.
class PauliSum {
 public:
  explicit PauliSum(std::size_t n_sites = 1);
  PauliSum(std::size_t n_sites, std::vector<PauliString> terms);

  std::size_t n_sites() const noexcept { return n_; }
  std::size_t dim() const noexcept { return std::size_t{1} << n_; }
  const std::vector<PauliString>& terms() const noexcept { return terms_; }

  void add(const PauliString& term);
  PauliSum& operator+=(const PauliSum& o);
  PauliSum& operator*=(cplx s);
  friend PauliSum operator*(const PauliSum& a, const PauliSum& b);
  friend PauliSum operator+(PauliSum a, const PauliSum& b) { return a += b; }

  /// Dense 2^N x 2^N matrix; guarded to N <= 14.
  CMatrix to_dense() const;

  /// Plain text, one term per line: `coeff_re coeff_im  WORD`.
  void write_text(std::ostream& os) const;
  static PauliSum read_text(std::istream& is);

 private:
  void canonicalize();
  std::size_t n_;
  std::vector<PauliString> terms_;
};

/// H = -C/mu d^2/dx^2 + V(x) on a uniform grid of 2^n_bits points, with a
/// 3-point central difference and zero (Dirichlet) boundaries.
struct GridOperator {
  std::size_t n_bits = 0;
  double x_min = 0.0;  // Angstrom
  double x_max = 0.0;  // Angstrom
  std::vector<double> potential;  // cm^-1
  double kinetic_coeff = 0.0;     // cm^-1, hbar^2 / (2 mu dx^2)

  std::size_t dim() const noexcept { return potential.size(); }
  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(dim()); }
  double x(std::size_t k) const noexcept { return x_min + static_cast<double>(k) * dx(); }
  CMatrix to_dense() const;
};

struct MorseParams {
  double de = 42301.0;  // cm^-1
  double am = 2.1440;   // 1/Angstrom
  double re = 0.9696;   // Angstrom
  double mu = 0.9527;   // amu
};

using Operator = std::variant<PauliSum, GridOperator>;

std::size_t dim(const Operator& h);
CMatrix to_dense(const Operator& h);

// Builders

PauliSum build_heisenberg(std::size_t n, double jx, double jy, double jz, double hz, bool periodic);

struct LadderOp {
  std::size_t mode;
  bool dagger;
};

/// coeff * op_0 op_1 ... (leftmost operator acts last).
struct FermionTerm {
  cplx coeff{1.0, 0.0};
  std::vector<LadderOp> ops;
};

PauliSum jordan_wigner(const FermionTerm& term, std::size_t n_modes);
PauliSum jordan_wigner(const std::vector<FermionTerm>& terms, std::size_t n_modes);

enum class HubbardOrdering { spin_major, site_major };

/// Mode index for lattice site `site` and spin (0 = up, 1 = down).
std::size_t hubbard_mode(std::size_t n_lattice_sites, std::size_t site, int spin,
                         HubbardOrdering ordering);

/// Fermionic Hubbard terms on an open lx x ly grid, before mapping.
std::vector<FermionTerm> hubbard_terms(std::size_t lx, std::size_t ly, double t, double u,
                                       HubbardOrdering ordering);

PauliSum build_hubbard(std::size_t lx, std::size_t ly, double t, double u,
                       HubbardOrdering ordering = HubbardOrdering::spin_major);

GridOperator build_morse_grid(std::size_t nd, double x_min, double x_max, const MorseParams& p);

double morse_potential(double x, const MorseParams& p);

// Application

DenseState apply(const PauliSum& h, const DenseState& psi);
DenseState apply(const GridOperator& h, const DenseState& psi);
DenseState apply(const Operator& h, const DenseState& psi);

/// <bra| H |ket>.
cplx matrix_element(const Operator& h, const DenseState& bra, const DenseState& ket);

}  // namespace hamiltonian
}  // namespace tracemin
