#include "tracemin/hamiltonian.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tracemin::hamiltonian {

namespace {

// i^k for k mod 4.
cplx i_power(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

std::uint64_t site_bit(std::size_t n, std::size_t site) { return std::uint64_t{1} << (n - 1 - site); }

void check_sites(std::size_t n) {
  if (n == 0 || n > kMaxSites) {
    throw InvalidSize(fmt::format("number of sites must be in [1, {}], got {}", kMaxSites, n));
  }
}

}  // namespace

double hbar2_over_2amu() {
  // CODATA 2018
  constexpr double h = 6.62607015e-34;           // J s (exact)
  constexpr double c_cm = 299792458.0 * 100.0;   // cm / s (exact)
  constexpr double amu = 1.66053906660e-27;      // kg
  constexpr double angstrom2 = 1e-20;            // m^2
  const double hbar = h / (2.0 * std::numbers::pi);
  return hbar * hbar / (2.0 * amu * angstrom2) / (h * c_cm);
}

// ---------------------------------------------------------------- PauliString

PauliString::PauliString(cplx coeff, std::string_view word) : coeff_(coeff), n_(word.size()) {
  check_sites(n_);
  for (std::size_t site = 0; site < n_; ++site) {
    const std::uint64_t b = site_bit(n_, site);
    switch (word[site]) {
      case 'I': break;
      case 'X': x_ |= b; break;
      case 'Y': x_ |= b; z_ |= b; break;
      case 'Z': z_ |= b; break;
      default:
        throw InvalidSize(fmt::format("invalid Pauli letter '{}' in '{}'", word[site], word));
    }
  }
}

PauliString::PauliString(cplx coeff, std::size_t n_sites, std::uint64_t x_mask,
                         std::uint64_t z_mask)
    : coeff_(coeff), n_(n_sites), x_(x_mask), z_(z_mask) {
  check_sites(n_);
  const std::uint64_t all = (std::uint64_t{1} << n_) - 1;
  if (((x_ | z_) & ~all) != 0) throw InvalidSize("Pauli mask exceeds the number of sites");
}

PauliString PauliString::identity(std::size_t n_sites, cplx coeff) {
  return PauliString(coeff, n_sites, 0, 0);
}

PauliString PauliString::single(std::size_t n_sites, std::size_t site, char op, cplx coeff) {
  check_sites(n_sites);
  if (site >= n_sites) throw InvalidSize(fmt::format("site {} out of range", site));
  std::string word(n_sites, 'I');
  word[site] = op;
  return PauliString(coeff, word);
}

char PauliString::op(std::size_t site) const {
  const std::uint64_t b = site_bit(n_, site);
  const bool x = (x_ & b) != 0;
  const bool z = (z_ & b) != 0;
  if (x && z) return 'Y';
  if (x) return 'X';
  if (z) return 'Z';
  return 'I';
}

std::string PauliString::word() const {
  std::string w(n_, 'I');
  for (std::size_t s = 0; s < n_; ++s) w[s] = op(s);
  return w;
}

int PauliString::y_count() const noexcept { return std::popcount(x_ & z_); }

PauliString operator*(const PauliString& a, const PauliString& b) {
  if (a.n_ != b.n_) throw DimensionMismatch("Pauli product over different site counts");
  // Each site is i^{xz} X^x Z^z; moving Z^{z_a} past X^{x_b} costs (-1)^{z_a x_b}.
  const std::uint64_t x = a.x_ ^ b.x_;
  const std::uint64_t z = a.z_ ^ b.z_;
  const int e = std::popcount(a.x_ & a.z_) + std::popcount(b.x_ & b.z_) +
                2 * std::popcount(a.z_ & b.x_) - std::popcount(x & z);
  return PauliString(a.coeff_ * b.coeff_ * i_power(e), a.n_, x, z);
}

// ------------------------------------------------------------------ PauliSum

PauliSum::PauliSum(std::size_t n_sites) : n_(n_sites) { check_sites(n_); }

PauliSum::PauliSum(std::size_t n_sites, std::vector<PauliString> terms)
    : n_(n_sites), terms_(std::move(terms)) {
  check_sites(n_);
  for (const auto& t : terms_) {
    if (t.n_sites() != n_) throw InvalidSize("Pauli string length differs from n_sites");
  }
  canonicalize();
}

void PauliSum::add(const PauliString& term) {
  if (term.n_sites() != n_) throw InvalidSize("Pauli string length differs from n_sites");
  terms_.push_back(term);
  canonicalize();
}

PauliSum& PauliSum::operator+=(const PauliSum& o) {
  if (o.n_ != n_) throw DimensionMismatch("adding Pauli sums over different site counts");
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  canonicalize();
  return *this;
}

PauliSum& PauliSum::operator*=(cplx s) {
  for (auto& t : terms_) t.set_coeff(t.coeff() * s);
  canonicalize();
  return *this;
}

PauliSum operator*(const PauliSum& a, const PauliSum& b) {
  if (a.n_ != b.n_) throw DimensionMismatch("multiplying Pauli sums over different site counts");
  std::vector<PauliString> out;
  out.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) out.push_back(ta * tb);
  }
  return PauliSum(a.n_, std::move(out));
}

void PauliSum::canonicalize() {
  std::stable_sort(terms_.begin(), terms_.end(), [](const PauliString& a, const PauliString& b) {
    return a.x_mask() != b.x_mask() ? a.x_mask() < b.x_mask() : a.z_mask() < b.z_mask();
  });
  std::vector<PauliString> merged;
  merged.reserve(terms_.size());
  for (const auto& t : terms_) {
    if (!merged.empty() && merged.back().same_ops(t)) {
      merged.back().set_coeff(merged.back().coeff() + t.coeff());
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const PauliString& t) { return std::abs(t.coeff()) < 1e-15; });
  terms_ = std::move(merged);
}

CMatrix PauliSum::to_dense() const {
  if (n_ > 14) throw TooLarge(fmt::format("dense matrix for {} sites exceeds the 2^14 guard", n_));
  const auto d = static_cast<Eigen::Index>(dim());
  CMatrix m = CMatrix::Zero(d, d);
  for (const auto& t : terms_) {
    const cplx base = t.coeff() * i_power(t.y_count());
    for (std::uint64_t i = 0; i < dim(); ++i) {
      const bool odd = (std::popcount(i & t.z_mask()) & 1) != 0;
      m(static_cast<Eigen::Index>(i ^ t.x_mask()), static_cast<Eigen::Index>(i)) +=
          odd ? -base : base;
    }
  }
  return m;
}

void PauliSum::write_text(std::ostream& os) const {
  os << "# n_sites " << n_ << '\n';
  for (const auto& t : terms_) {
    os << fmt::format("{} {}  {}\n", t.coeff().real(), t.coeff().imag(), t.word());
  }
}

PauliSum PauliSum::read_text(std::istream& is) {
  std::size_t n = 0;
  std::vector<PauliString> terms;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream hs(line.substr(first + 1));
      std::string key;
      if (hs >> key && key == "n_sites") hs >> n;
      continue;
    }
    std::istringstream ls(line);
    double re = 0.0;
    double im = 0.0;
    std::string word;
    if (!(ls >> re >> im >> word)) {
      throw InvalidSize(fmt::format("malformed Pauli term on line {}: '{}'", lineno, line));
    }
    if (n == 0) n = word.size();
    if (word.size() != n) {
      throw InvalidSize(fmt::format("Pauli word on line {} has length {}, expected {}", lineno,
                                    word.size(), n));
    }
    terms.emplace_back(cplx(re, im), word);
  }
  if (n == 0) throw InvalidSize("Pauli sum text has no terms and no n_sites header");
  return PauliSum(n, std::move(terms));
}

// -------------------------------------------------------------- GridOperator

CMatrix GridOperator::to_dense() const {
  if (n_bits > 14) throw TooLarge("dense grid operator exceeds the 2^14 guard");
  const auto d = static_cast<Eigen::Index>(dim());
  CMatrix m = CMatrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    m(k, k) = 2.0 * kinetic_coeff + potential[static_cast<std::size_t>(k)];
    if (k > 0) m(k, k - 1) = -kinetic_coeff;
    if (k + 1 < d) m(k, k + 1) = -kinetic_coeff;
  }
  return m;
}

std::size_t dim(const Operator& h) {
  return std::visit([](const auto& op) { return op.dim(); }, h);
}

CMatrix to_dense(const Operator& h) {
  return std::visit([](const auto& op) { return op.to_dense(); }, h);
}

// ------------------------------------------------------------------ builders

PauliSum build_heisenberg(std::size_t n, double jx, double jy, double jz, double hz,
                          bool periodic) {
  if (n < 2) throw InvalidSize(fmt::format("Heisenberg chain needs n >= 2, got {}", n));
  check_sites(n);
  std::vector<PauliString> terms;
  const std::size_t bonds = periodic ? n : n - 1;
  for (std::size_t b = 0; b < bonds; ++b) {
    const std::size_t i = b;
    const std::size_t j = (b + 1) % n;
    const std::pair<char, double> axes[] = {{'X', jx}, {'Y', jy}, {'Z', jz}};
    for (const auto& [axis, coupling] : axes) {
      if (coupling == 0.0) continue;
      terms.push_back(PauliString::single(n, i, axis, 0.25 * coupling) *
                      PauliString::single(n, j, axis));
    }
  }
  if (hz != 0.0) {
    for (std::size_t i = 0; i < n; ++i) terms.push_back(PauliString::single(n, i, 'Z', hz));
  }
  return PauliSum(n, std::move(terms));
}

namespace {

// Image of c_j (dagger = false) or c_j^dagger under Jordan-Wigner.
PauliSum ladder_image(std::size_t mode, bool dagger, std::size_t n_modes) {
  std::uint64_t parity = 0;
  for (std::size_t k = 0; k < mode; ++k) parity |= site_bit(n_modes, k);
  const std::uint64_t b = site_bit(n_modes, mode);
  const PauliString tail(1.0, n_modes, 0, parity);
  const PauliString x(0.5, n_modes, b, 0);
  const PauliString y(dagger ? cplx(0.0, -0.5) : cplx(0.0, 0.5), n_modes, b, b);
  return PauliSum(n_modes, {tail * x, tail * y});
}

}  // namespace

PauliSum jordan_wigner(const FermionTerm& term, std::size_t n_modes) {
  check_sites(n_modes);
  PauliSum out(n_modes, {PauliString::identity(n_modes, term.coeff)});
  for (const auto& op : term.ops) {
    if (op.mode >= n_modes) {
      throw ModeOutOfRange(fmt::format("mode {} is outside 0..{}", op.mode, n_modes - 1));
    }
    out = out * ladder_image(op.mode, op.dagger, n_modes);
  }
  return out;
}

PauliSum jordan_wigner(const std::vector<FermionTerm>& terms, std::size_t n_modes) {
  PauliSum out(n_modes);
  for (const auto& t : terms) out += jordan_wigner(t, n_modes);
  return out;
}

std::size_t hubbard_mode(std::size_t n_lattice_sites, std::size_t site, int spin,
                         HubbardOrdering ordering) {
  const auto s = static_cast<std::size_t>(spin);
  return ordering == HubbardOrdering::spin_major ? s * n_lattice_sites + site : 2 * site + s;
}

std::vector<FermionTerm> hubbard_terms(std::size_t lx, std::size_t ly, double t, double u,
                                       HubbardOrdering ordering) {
  if (lx == 0 || ly == 0) throw InvalidSize("Hubbard lattice dimensions must be positive");
  const std::size_t l = lx * ly;
  if (2 * l > kMaxSites) throw InvalidSize("Hubbard lattice too large");
  auto site = [lx](std::size_t x, std::size_t y) { return x + lx * y; };
  std::vector<std::pair<std::size_t, std::size_t>> bonds;
  for (std::size_t y = 0; y < ly; ++y) {
    for (std::size_t x = 0; x < lx; ++x) {
      if (x + 1 < lx) bonds.emplace_back(site(x, y), site(x + 1, y));
      if (y + 1 < ly) bonds.emplace_back(site(x, y), site(x, y + 1));
    }
  }
  std::vector<FermionTerm> terms;
  for (const auto& [i, j] : bonds) {
    for (int spin = 0; spin < 2; ++spin) {
      const std::size_t a = hubbard_mode(l, i, spin, ordering);
      const std::size_t b = hubbard_mode(l, j, spin, ordering);
      terms.push_back({-t, {{a, true}, {b, false}}});
      terms.push_back({-t, {{b, true}, {a, false}}});
    }
  }
  // U (n_up - 1/2)(n_dn - 1/2) = U n_up n_dn - U/2 n_up - U/2 n_dn + U/4
  for (std::size_t i = 0; i < l; ++i) {
    const std::size_t up = hubbard_mode(l, i, 0, ordering);
    const std::size_t dn = hubbard_mode(l, i, 1, ordering);
    terms.push_back({u, {{up, true}, {up, false}, {dn, true}, {dn, false}}});
    terms.push_back({-0.5 * u, {{up, true}, {up, false}}});
    terms.push_back({-0.5 * u, {{dn, true}, {dn, false}}});
    terms.push_back({0.25 * u, {}});
  }
  return terms;
}

PauliSum build_hubbard(std::size_t lx, std::size_t ly, double t, double u,
                       HubbardOrdering ordering) {
  const auto terms = hubbard_terms(lx, ly, t, u, ordering);
  return jordan_wigner(terms, 2 * lx * ly);
}

double morse_potential(double x, const MorseParams& p) {
  const double f = 1.0 - std::exp(-p.am * (x - p.re));
  return p.de * f * f;
}

GridOperator build_morse_grid(std::size_t nd, double x_min, double x_max, const MorseParams& p) {
  if (nd < 4 || nd > 30) throw InvalidGrid(fmt::format("n_bits must be in [4, 30], got {}", nd));
  if (!(x_max > x_min)) throw InvalidGrid("x_max must exceed x_min");
  if (!(p.de > 0.0 && p.am > 0.0 && p.mu > 0.0)) {
    throw InvalidGrid("Morse parameters D_e, a_M and mu must be positive");
  }
  GridOperator g;
  g.n_bits = nd;
  g.x_min = x_min;
  g.x_max = x_max;
  g.potential.resize(std::size_t{1} << nd);
  for (std::size_t k = 0; k < g.potential.size(); ++k) g.potential[k] = morse_potential(g.x(k), p);
  const double dx = g.dx();
  g.kinetic_coeff = hbar2_over_2amu() / (p.mu * dx * dx);
  return g;
}

// --------------------------------------------------------------- application

DenseState apply(const PauliSum& h, const DenseState& psi) {
  if (static_cast<std::size_t>(psi.size()) != h.dim()) {
    throw DimensionMismatch(fmt::format("state has {} amplitudes, operator acts on {}",
                                        psi.size(), h.dim()));
  }
  const std::uint64_t d = h.dim();
  DenseState out = DenseState::Zero(psi.size());
  cplx* o = out.data();
  const cplx* p = psi.data();
  for (const auto& t : h.terms()) {
    const cplx base = t.coeff() * i_power(t.y_count());
    const std::uint64_t x = t.x_mask();
    const std::uint64_t z = t.z_mask();
    for (std::uint64_t i = 0; i < d; ++i) {
      const bool odd = (std::popcount(i & z) & 1) != 0;
      o[i ^ x] += (odd ? -base : base) * p[i];
    }
  }
  return out;
}

DenseState apply(const GridOperator& h, const DenseState& psi) {
  const auto d = static_cast<Eigen::Index>(h.dim());
  if (psi.size() != d) {
    throw DimensionMismatch(
        fmt::format("state has {} amplitudes, grid has {} points", psi.size(), d));
  }
  DenseState out(d);
  const double c = h.kinetic_coeff;
  for (Eigen::Index k = 0; k < d; ++k) {
    cplx v = (2.0 * c + h.potential[static_cast<std::size_t>(k)]) * psi(k);
    if (k > 0) v -= c * psi(k - 1);
    if (k + 1 < d) v -= c * psi(k + 1);
    out(k) = v;
  }
  return out;
}

DenseState apply(const Operator& h, const DenseState& psi) {
  return std::visit([&](const auto& op) { return apply(op, psi); }, h);
}

cplx matrix_element(const Operator& h, const DenseState& bra, const DenseState& ket) {
  if (bra.size() != ket.size()) throw DimensionMismatch("bra and ket dimensions differ");
  return bra.dot(apply(h, ket));
}

}  // namespace tracemin::hamiltonian
