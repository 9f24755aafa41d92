#include "tracemin/ansatz.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>

namespace tracemin::ansatz {

// -------------------------------------------------------------------- Family

nlohmann::json Family::metadata() const {
  return {{"family", id()}, {"dim", dim()}, {"param_count", param_count()}};
}

void Family::check_params(std::span<const double> params) const {
  if (params.size() != param_count()) {
    throw ShapeMismatch(fmt::format("{}: expected {} parameters, got {}", id(), param_count(),
                                    params.size()));
  }
}

void Family::check_cotangent(const DenseState& cotangent) const {
  if (static_cast<std::size_t>(cotangent.size()) != dim()) {
    throw ShapeMismatch(fmt::format("{}: cotangent has {} amplitudes, state has {}", id(),
                                    cotangent.size(), dim()));
  }
}

// ---------------------------------------------------------------- DenseTable

DenseTable::DenseTable(std::size_t dim, bool complex) : dim_(dim), complex_(complex) {
  if (dim == 0) throw ShapeMismatch("dense table needs a positive dimension");
}

DenseState DenseTable::state(std::span<const double> params) const {
  check_params(params);
  DenseState psi(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < dim_; ++k) {
    psi(static_cast<Eigen::Index>(k)) =
        complex_ ? cplx(params[2 * k], params[2 * k + 1]) : cplx(params[k], 0.0);
  }
  return psi;
}

std::vector<double> DenseTable::vjp(std::span<const double> params,
                                    const DenseState& cotangent) const {
  check_params(params);
  check_cotangent(cotangent);
  std::vector<double> g(param_count());
  for (std::size_t k = 0; k < dim_; ++k) {
    const cplx c = cotangent(static_cast<Eigen::Index>(k));
    if (complex_) {
      g[2 * k] = 2.0 * c.real();
      g[2 * k + 1] = 2.0 * c.imag();
    } else {
      g[k] = 2.0 * c.real();
    }
  }
  return g;
}

nlohmann::json DenseTable::metadata() const {
  auto m = Family::metadata();
  m["complex"] = complex_;
  return m;
}

// ----------------------------------------------------------------------- MPS

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
constexpr bool kIsComplex = !std::is_same_v<T, double>;

// Contraction tree for one MPS: all prefix products over the left half and
// all suffix products over the right half, then amplitudes as a single GEMM
// Psi(a, b) = Tr(L_a R_b).
template <class T>
class MpsContraction {
 public:
  MpsContraction(const Mps& mps, std::span<const double> params) : mps_(mps) {
    const std::size_t n = mps.shape().n_sites;
    half_ = n / 2;
    cores_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto dl = static_cast<Eigen::Index>(mps.left_dim(k));
      const auto dr = static_cast<Eigen::Index>(mps.right_dim(k));
      const double* p = params.data() + mps.offset(k);
      for (int s = 0; s < 2; ++s) {
        Mat<T> a(dl, dr);
        for (Eigen::Index i = 0; i < dl; ++i) {
          for (Eigen::Index j = 0; j < dr; ++j) {
            if constexpr (kIsComplex<T>) {
              a(i, j) = T(p[0], p[1]);
              p += 2;
            } else {
              a(i, j) = *p++;
            }
          }
        }
        cores_[k][static_cast<std::size_t>(s)] = std::move(a);
      }
    }
    build_left();
    build_right();
    pack();
  }

  Mat<T> amplitudes() const { return lmat_ * rmat_; }

  /// Holomorphic gradient of sum_{a,b} W(a,b) Psi(a,b) per core entry.
  std::vector<std::array<Mat<T>, 2>> backward(const Mat<T>& w) const {
    const std::size_t n = cores_.size();
    std::vector<std::array<Mat<T>, 2>> grad(n);
    for (std::size_t k = 0; k < n; ++k) {
      for (int s = 0; s < 2; ++s) {
        const auto& a = cores_[k][static_cast<std::size_t>(s)];
        grad[k][static_cast<std::size_t>(s)] = Mat<T>::Zero(a.rows(), a.cols());
      }
    }
    const Mat<T> dl = w * rmat_.transpose();
    const Mat<T> dr = lmat_.transpose() * w;
    const Eigen::Index d0 = left_.back().front().rows();
    const Eigen::Index dm = left_.back().front().cols();

    // Left half, top level first.
    std::vector<Mat<T>> dlev(left_.back().size());
    for (std::size_t a = 0; a < dlev.size(); ++a) {
      Mat<T> m(d0, dm);
      for (Eigen::Index p = 0; p < d0; ++p) {
        for (Eigen::Index q = 0; q < dm; ++q) m(p, q) = dl(static_cast<Eigen::Index>(a), p * dm + q);
      }
      dlev[a] = std::move(m);
    }
    for (std::size_t level = left_.size(); level-- > 1;) {
      const std::size_t site = level;  // core consumed going from level-1 to level
      const auto& parents = left_[level - 1];
      std::vector<Mat<T>> dparent(parents.size());
      for (std::size_t a = 0; a < parents.size(); ++a) {
        dparent[a] = Mat<T>::Zero(parents[a].rows(), parents[a].cols());
        for (std::size_t s = 0; s < 2; ++s) {
          const Mat<T>& dchild = dlev[2 * a + s];
          grad[site][s].noalias() += parents[a].transpose() * dchild;
          dparent[a].noalias() += dchild * cores_[site][s].transpose();
        }
      }
      dlev = std::move(dparent);
    }
    for (std::size_t s = 0; s < 2; ++s) grad[0][s] += dlev[s];

    // Right half.
    const std::size_t n_right = right_.back().size();
    std::vector<Mat<T>> drev(n_right);
    for (std::size_t b = 0; b < n_right; ++b) {
      Mat<T> m(dm, d0);
      for (Eigen::Index p = 0; p < d0; ++p) {
        for (Eigen::Index q = 0; q < dm; ++q) m(q, p) = dr(p * dm + q, static_cast<Eigen::Index>(b));
      }
      drev[b] = std::move(m);
    }
    for (std::size_t level = right_.size(); level-- > 1;) {
      const std::size_t site = n - 1 - level;
      const auto& parents = right_[level - 1];
      const std::size_t stride = parents.size();
      std::vector<Mat<T>> dparent(parents.size());
      for (std::size_t b = 0; b < parents.size(); ++b) {
        dparent[b] = Mat<T>::Zero(parents[b].rows(), parents[b].cols());
        for (std::size_t s = 0; s < 2; ++s) {
          const Mat<T>& dchild = drev[s * stride + b];
          grad[site][s].noalias() += dchild * parents[b].transpose();
          dparent[b].noalias() += cores_[site][s].transpose() * dchild;
        }
      }
      drev = std::move(dparent);
    }
    for (std::size_t s = 0; s < 2; ++s) grad[n - 1][s] += drev[s];
    return grad;
  }

  std::size_t left_bits() const noexcept { return half_; }
  std::size_t right_bits() const noexcept { return cores_.size() - half_; }

 private:
  void build_left() {
    left_.resize(half_);
    left_[0] = {cores_[0][0], cores_[0][1]};
    for (std::size_t level = 1; level < half_; ++level) {
      const auto& prev = left_[level - 1];
      auto& cur = left_[level];
      cur.resize(2 * prev.size());
      for (std::size_t a = 0; a < prev.size(); ++a) {
        for (std::size_t s = 0; s < 2; ++s) cur[2 * a + s].noalias() = prev[a] * cores_[level][s];
      }
    }
  }

  void build_right() {
    const std::size_t n = cores_.size();
    const std::size_t levels = n - half_;
    right_.resize(levels);
    right_[0] = {cores_[n - 1][0], cores_[n - 1][1]};
    for (std::size_t level = 1; level < levels; ++level) {
      const std::size_t site = n - 1 - level;
      const auto& prev = right_[level - 1];
      auto& cur = right_[level];
      cur.resize(2 * prev.size());
      for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t b = 0; b < prev.size(); ++b) {
          cur[s * prev.size() + b].noalias() = cores_[site][s] * prev[b];
        }
      }
    }
  }

  void pack() {
    const auto& top_left = left_.back();
    const auto& top_right = right_.back();
    const Eigen::Index d0 = top_left.front().rows();
    const Eigen::Index dm = top_left.front().cols();
    lmat_.resize(static_cast<Eigen::Index>(top_left.size()), d0 * dm);
    for (std::size_t a = 0; a < top_left.size(); ++a) {
      for (Eigen::Index p = 0; p < d0; ++p) {
        for (Eigen::Index q = 0; q < dm; ++q) {
          lmat_(static_cast<Eigen::Index>(a), p * dm + q) = top_left[a](p, q);
        }
      }
    }
    rmat_.resize(d0 * dm, static_cast<Eigen::Index>(top_right.size()));
    for (std::size_t b = 0; b < top_right.size(); ++b) {
      for (Eigen::Index p = 0; p < d0; ++p) {
        for (Eigen::Index q = 0; q < dm; ++q) {
          rmat_(p * dm + q, static_cast<Eigen::Index>(b)) = top_right[b](q, p);
        }
      }
    }
  }

  const Mps& mps_;
  std::size_t half_ = 0;
  std::vector<std::array<Mat<T>, 2>> cores_;
  std::vector<std::vector<Mat<T>>> left_;   // left_[j]: 2^(j+1) products over sites 0..j
  std::vector<std::vector<Mat<T>>> right_;  // right_[j]: products over sites n-1-j..n-1
  Mat<T> lmat_;
  Mat<T> rmat_;
};

template <class T>
DenseState mps_state(const Mps& mps, std::span<const double> params) {
  const MpsContraction<T> c(mps, params);
  const Mat<T> psi = c.amplitudes();
  DenseState out(static_cast<Eigen::Index>(mps.dim()));
  const Eigen::Index cols = psi.cols();
  for (Eigen::Index a = 0; a < psi.rows(); ++a) {
    for (Eigen::Index b = 0; b < cols; ++b) out(a * cols + b) = psi(a, b);
  }
  return out;
}

template <class T>
std::vector<double> mps_vjp(const Mps& mps, std::span<const double> params,
                            const DenseState& cotangent) {
  const MpsContraction<T> c(mps, params);
  const auto rows = static_cast<Eigen::Index>(std::size_t{1} << c.left_bits());
  const auto cols = static_cast<Eigen::Index>(std::size_t{1} << c.right_bits());
  Mat<T> w(rows, cols);
  for (Eigen::Index a = 0; a < rows; ++a) {
    for (Eigen::Index b = 0; b < cols; ++b) {
      const cplx v = cotangent(a * cols + b);
      if constexpr (kIsComplex<T>) {
        w(a, b) = std::conj(v);
      } else {
        w(a, b) = v.real();
      }
    }
  }
  const auto grad = c.backward(w);
  std::vector<double> g(mps.param_count());
  for (std::size_t k = 0; k < grad.size(); ++k) {
    double* out = g.data() + mps.offset(k);
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& m = grad[k][s];
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          if constexpr (kIsComplex<T>) {
            *out++ = 2.0 * m(i, j).real();
            *out++ = -2.0 * m(i, j).imag();
          } else {
            *out++ = 2.0 * m(i, j);
          }
        }
      }
    }
  }
  return g;
}

std::size_t capped_rank(std::size_t chi, std::size_t bond, std::size_t n) {
  // Bond `bond` separates sites 0..bond from bond+1..n-1.
  const std::size_t left_bits = bond + 1;
  const std::size_t right_bits = n - bond - 1;
  std::size_t cap = chi;
  if (left_bits < 63) cap = std::min(cap, std::size_t{1} << left_bits);
  if (right_bits < 63) cap = std::min(cap, std::size_t{1} << right_bits);
  return cap;
}

}  // namespace

Mps::Mps(MpsShape shape, std::string id) : shape_(shape), id_(std::move(id)) {
  const std::size_t n = shape.n_sites;
  if (n < 2 || n > 30) throw ShapeMismatch(fmt::format("MPS needs 2..30 sites, got {}", n));
  if (shape.bond_dim == 0) throw ShapeMismatch("MPS bond dimension must be positive");
  if (id_.empty()) id_ = shape.boundary == Boundary::periodic ? "periodic_mps" : "open_mps";
  const std::size_t edge = shape.boundary == Boundary::periodic ? shape.bond_dim : 1;
  std::vector<std::size_t> bonds(n - 1);
  for (std::size_t b = 0; b + 1 < n; ++b) {
    bonds[b] = shape.boundary == Boundary::periodic ? shape.bond_dim
                                                    : capped_rank(shape.bond_dim, b, n);
  }
  left_.resize(n);
  right_.resize(n);
  offsets_.assign(n + 1, 0);
  const std::size_t per_entry = shape.complex ? 2 : 1;
  for (std::size_t k = 0; k < n; ++k) {
    left_[k] = k == 0 ? edge : bonds[k - 1];
    right_[k] = k + 1 == n ? edge : bonds[k];
    offsets_[k + 1] = offsets_[k] + 2 * left_[k] * right_[k] * per_entry;
  }
}

DenseState Mps::state(std::span<const double> params) const {
  check_params(params);
  return shape_.complex ? mps_state<cplx>(*this, params) : mps_state<double>(*this, params);
}

std::vector<double> Mps::vjp(std::span<const double> params, const DenseState& cotangent) const {
  check_params(params);
  check_cotangent(cotangent);
  return shape_.complex ? mps_vjp<cplx>(*this, params, cotangent)
                        : mps_vjp<double>(*this, params, cotangent);
}

nlohmann::json Mps::metadata() const {
  auto m = Family::metadata();
  m["n_sites"] = shape_.n_sites;
  m["bond_dim"] = shape_.bond_dim;
  m["boundary"] = shape_.boundary == Boundary::periodic ? "periodic" : "open";
  m["complex"] = shape_.complex;
  std::vector<std::size_t> bonds;
  for (std::size_t k = 0; k + 1 < shape_.n_sites; ++k) bonds.push_back(right_[k]);
  m["bonds"] = bonds;
  return m;
}

MpsTensors Mps::tensors(std::span<const double> params) const {
  check_params(params);
  MpsTensors t;
  t.boundary = shape_.boundary;
  t.cores.resize(shape_.n_sites);
  for (std::size_t k = 0; k < shape_.n_sites; ++k) {
    const double* p = params.data() + offsets_[k];
    for (std::size_t s = 0; s < 2; ++s) {
      CMatrix a(static_cast<Eigen::Index>(left_[k]), static_cast<Eigen::Index>(right_[k]));
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          if (shape_.complex) {
            a(i, j) = cplx(p[0], p[1]);
            p += 2;
          } else {
            a(i, j) = *p++;
          }
        }
      }
      t.cores[k][s] = std::move(a);
    }
  }
  return t;
}

std::unique_ptr<Mps> open_mps(std::size_t n_sites, std::size_t bond_dim, bool complex) {
  return std::make_unique<Mps>(MpsShape{n_sites, bond_dim, Boundary::open, complex});
}

std::unique_ptr<Mps> periodic_mps(std::size_t n_sites, std::size_t bond_dim, bool complex) {
  return std::make_unique<Mps>(MpsShape{n_sites, bond_dim, Boundary::periodic, complex});
}

std::unique_ptr<Mps> quantics_tt(std::size_t n_bits, std::size_t max_rank, bool complex) {
  return std::make_unique<Mps>(MpsShape{n_bits, max_rank, Boundary::open, complex},
                               "quantics_tt");
}

namespace {

void check_pair(const MpsTensors& a, const MpsTensors& b) {
  if (a.n_sites() != b.n_sites() || a.n_sites() == 0) {
    throw ShapeMismatch("MPS overlap needs two nonempty chains of equal length");
  }
  if (a.boundary != b.boundary) throw ShapeMismatch("MPS overlap needs matching boundaries");
  for (std::size_t k = 0; k < a.n_sites(); ++k) {
    for (std::size_t s = 0; s < 2; ++s) {
      if (k + 1 < a.n_sites() && (a.cores[k][s].cols() != a.cores[k + 1][s].rows() ||
                                  b.cores[k][s].cols() != b.cores[k + 1][s].rows())) {
        throw ShapeMismatch(fmt::format("inconsistent bond between sites {} and {}", k, k + 1));
      }
    }
  }
}

}  // namespace

cplx mps_pair_overlap(const MpsTensors& a, const MpsTensors& b) {
  check_pair(a, b);
  const std::size_t n = a.n_sites();
  if (a.boundary == Boundary::open) {
    if (a.cores[0][0].rows() != 1 || b.cores[0][0].rows() != 1) {
      throw ShapeMismatch("open MPS must start with a unit bond");
    }
    CMatrix env = CMatrix::Ones(1, 1);
    for (std::size_t k = 0; k < n; ++k) {
      CMatrix next = CMatrix::Zero(a.cores[k][0].cols(), b.cores[k][0].cols());
      for (std::size_t s = 0; s < 2; ++s) {
        next.noalias() += a.cores[k][s].adjoint() * env * b.cores[k][s];
      }
      env = std::move(next);
    }
    return env(0, 0);
  }
  // Periodic: Tr(prod_k T_k) with T_k = sum_s conj(A_k(s)) (x) B_k(s).
  auto transfer = [&](std::size_t k) {
    const CMatrix& a0 = a.cores[k][0];
    const CMatrix& b0 = b.cores[k][0];
    CMatrix t = CMatrix::Zero(a0.rows() * b0.rows(), a0.cols() * b0.cols());
    for (std::size_t s = 0; s < 2; ++s) {
      const CMatrix& as = a.cores[k][s];
      const CMatrix& bs = b.cores[k][s];
      for (Eigen::Index i = 0; i < as.rows(); ++i) {
        for (Eigen::Index j = 0; j < as.cols(); ++j) {
          t.block(i * bs.rows(), j * bs.cols(), bs.rows(), bs.cols()) += std::conj(as(i, j)) * bs;
        }
      }
    }
    return t;
  };
  CMatrix prod = transfer(0);
  for (std::size_t k = 1; k < n; ++k) prod = (prod * transfer(k)).eval();
  return prod.trace();
}

DenseState mps_contract_naive(const MpsTensors& t) {
  const std::size_t n = t.n_sites();
  const std::size_t d = std::size_t{1} << n;
  DenseState out(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    CMatrix m = t.cores[0][(i >> (n - 1)) & 1];
    for (std::size_t k = 1; k < n; ++k) m = (m * t.cores[k][(i >> (n - 1 - k)) & 1]).eval();
    out(static_cast<Eigen::Index>(i)) = m.trace();
  }
  return out;
}

// ------------------------------------------------------------------- Circuit

std::uint64_t basis_index(std::string_view bits, std::size_t n_qubits) {
  if (bits.size() != n_qubits) {
    throw InvalidBasisString(
        fmt::format("basis string '{}' has length {}, expected {}", bits, bits.size(), n_qubits));
  }
  std::uint64_t idx = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw InvalidBasisString(fmt::format("basis string '{}' must contain only 0/1", bits));
    }
    idx = (idx << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return idx;
}

Circuit::Circuit(std::size_t n_qubits, std::size_t depth, std::string input_state)
    : n_(n_qubits), depth_(depth), input_(std::move(input_state)) {
  if (n_ == 0 || n_ > 24) throw ShapeMismatch(fmt::format("circuit needs 1..24 qubits, got {}", n_));
  if (depth_ == 0) throw ShapeMismatch("circuit depth must be positive");
  if (input_.empty()) input_.assign(n_, '0');
  basis_index(input_, n_);
  auto bit = [this](std::size_t q) { return std::uint64_t{1} << (n_ - 1 - q); };
  for (std::size_t d = 0; d < depth_; ++d) {
    for (std::size_t q = 0; q < n_; ++q) {
      gates_.push_back({bit(q), bit(q), 1, -0.5});  // R_y
      gates_.push_back({0, bit(q), 0, -0.5});       // R_z
      gates_.push_back({bit(q), 0, 0, -0.5});       // R_x
    }
    for (std::size_t j = 0; j + 1 < n_; ++j) {
      const std::uint64_t pair = bit(j) | bit(j + 1);
      gates_.push_back({0, pair, 0, 1.0});     // ZZ
      gates_.push_back({pair, 0, 0, 1.0});     // XX
      gates_.push_back({pair, pair, 2, 1.0});  // YY
    }
  }
}

namespace {

cplx pauli_phase(std::uint64_t i, std::uint64_t z_mask, int y_count) {
  static const cplx kI[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx base = kI[y_count & 3];
  return (std::popcount(i & z_mask) & 1) != 0 ? -base : base;
}

}  // namespace

// psi <- exp(i angle P) psi = cos(angle) psi + i sin(angle) P psi
void Circuit::apply_gate(const Gate& g, double angle, DenseState& psi) const {
  const double c = std::cos(angle);
  const cplx is(0.0, std::sin(angle));
  const std::uint64_t d = dim();
  cplx* p = psi.data();
  if (g.x_mask == 0) {
    for (std::uint64_t i = 0; i < d; ++i) p[i] *= c + is * pauli_phase(i, g.z_mask, g.y_count);
    return;
  }
  for (std::uint64_t i = 0; i < d; ++i) {
    const std::uint64_t j = i ^ g.x_mask;
    if (j < i) continue;
    const cplx pi = p[i];
    const cplx pj = p[j];
    p[i] = c * pi + is * pauli_phase(j, g.z_mask, g.y_count) * pj;
    p[j] = c * pj + is * pauli_phase(i, g.z_mask, g.y_count) * pi;
  }
}

// <bra| P |ket>
cplx Circuit::pauli_overlap(const Gate& g, const DenseState& bra, const DenseState& ket) const {
  cplx acc = 0.0;
  const std::uint64_t d = dim();
  for (std::uint64_t i = 0; i < d; ++i) {
    acc += std::conj(bra(static_cast<Eigen::Index>(i ^ g.x_mask))) *
           pauli_phase(i, g.z_mask, g.y_count) * ket(static_cast<Eigen::Index>(i));
  }
  return acc;
}

DenseState Circuit::run(std::span<const double> params, DenseState input) const {
  check_params(params);
  if (static_cast<std::size_t>(input.size()) != dim()) throw ShapeMismatch("circuit input size");
  for (std::size_t k = 0; k < gates_.size(); ++k) {
    apply_gate(gates_[k], gates_[k].scale * params[k], input);
  }
  return input;
}

std::vector<double> Circuit::run_vjp(std::span<const double> params, const DenseState& input,
                                     const DenseState& cotangent) const {
  check_params(params);
  check_cotangent(cotangent);
  DenseState psi = run(params, input);
  DenseState lambda = cotangent;
  std::vector<double> g(gates_.size());
  // d/dt exp(i s t P) = i s P exp(i s t P); g = 2 Re <lambda| i s P |psi_after>.
  for (std::size_t k = gates_.size(); k-- > 0;) {
    const Gate& gate = gates_[k];
    g[k] = -2.0 * gate.scale * pauli_overlap(gate, lambda, psi).imag();
    const double angle = -gate.scale * params[k];
    apply_gate(gate, angle, psi);
    apply_gate(gate, angle, lambda);
  }
  return g;
}

DenseState Circuit::state(std::span<const double> params) const {
  DenseState in = DenseState::Zero(static_cast<Eigen::Index>(dim()));
  in(static_cast<Eigen::Index>(basis_index(input_, n_))) = 1.0;
  return run(params, std::move(in));
}

std::vector<double> Circuit::vjp(std::span<const double> params,
                                 const DenseState& cotangent) const {
  DenseState in = DenseState::Zero(static_cast<Eigen::Index>(dim()));
  in(static_cast<Eigen::Index>(basis_index(input_, n_))) = 1.0;
  return run_vjp(params, in, cotangent);
}

nlohmann::json Circuit::metadata() const {
  auto m = Family::metadata();
  m["n_qubits"] = n_;
  m["depth"] = depth_;
  m["input_state"] = input_;
  m["rotation_convention"] = "R_a(t) = exp(-i t a / 2); per qubit R_y, R_z, R_x";
  m["entangler_convention"] = "exp(+i t P P) on (j, j+1); per pair ZZ, XX, YY";
  return m;
}

std::vector<DenseState> shared_circuit_states(const Circuit& circuit, std::span<const double> phi,
                                              const std::vector<std::string>& inputs) {
  std::set<std::uint64_t> seen;
  std::vector<DenseState> out;
  out.reserve(inputs.size());
  for (const auto& s : inputs) {
    const std::uint64_t idx = basis_index(s, circuit.n_qubits());
    if (!seen.insert(idx).second) {
      throw InvalidBasisString(fmt::format("duplicate basis input '{}'", s));
    }
    DenseState in = DenseState::Zero(static_cast<Eigen::Index>(circuit.dim()));
    in(static_cast<Eigen::Index>(idx)) = 1.0;
    out.push_back(circuit.run(phi, std::move(in)));
  }
  return out;
}

// ------------------------------------------------------------ initialization

std::uint64_t subseed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ mix(index + 0x632be59bd9b4e019ULL));
}

ParamVector init_params(const Family& family, double sigma, std::uint64_t seed,
                        std::size_t state_index) {
  if (!(sigma > 0.0)) throw ConfigError("init sigma must be positive");
  std::mt19937_64 gen(subseed(seed, state_index));
  std::normal_distribution<double> normal(0.0, sigma);
  ParamVector p;
  p.family_id = family.id();
  p.state_index = state_index;
  p.values.resize(family.param_count());
  for (auto& v : p.values) v = normal(gen);
  return p;
}

// ------------------------------------------------------------------ StateSet

IndependentStates::IndependentStates(std::shared_ptr<const Family> family, std::size_t ns)
    : family_(std::move(family)), ns_(ns) {
  if (!family_) throw ShapeMismatch("state set needs a family");
  if (ns_ == 0) throw ShapeMismatch("state set needs at least one state");
}

std::vector<DenseState> IndependentStates::states(std::span<const double> params) const {
  if (params.size() != param_count()) {
    throw ShapeMismatch(
        fmt::format("expected {} pooled parameters, got {}", param_count(), params.size()));
  }
  const std::size_t p = family_->param_count();
  std::vector<DenseState> out;
  out.reserve(ns_);
  for (std::size_t i = 0; i < ns_; ++i) out.push_back(family_->state(params.subspan(i * p, p)));
  return out;
}

std::vector<double> IndependentStates::vjp(std::span<const double> params,
                                           const std::vector<DenseState>& cotangents) const {
  if (cotangents.size() != ns_) throw ShapeMismatch("one cotangent per state is required");
  if (params.size() != param_count()) throw ShapeMismatch("pooled parameter count mismatch");
  const std::size_t p = family_->param_count();
  std::vector<double> g(param_count());
  for (std::size_t i = 0; i < ns_; ++i) {
    const auto gi = family_->vjp(params.subspan(i * p, p), cotangents[i]);
    std::copy(gi.begin(), gi.end(), g.begin() + static_cast<std::ptrdiff_t>(i * p));
  }
  return g;
}

std::vector<double> IndependentStates::init(double sigma, std::uint64_t seed) const {
  std::vector<double> x;
  x.reserve(param_count());
  for (std::size_t i = 0; i < ns_; ++i) {
    const auto p = init_params(*family_, sigma, seed, i);
    x.insert(x.end(), p.values.begin(), p.values.end());
  }
  return x;
}

nlohmann::json IndependentStates::metadata() const {
  return {{"kind", "independent"}, {"ns", ns_}, {"family", family_->metadata()}};
}

SharedCircuitStates::SharedCircuitStates(std::shared_ptr<const Circuit> circuit,
                                         std::vector<std::string> inputs)
    : circuit_(std::move(circuit)), inputs_(std::move(inputs)) {
  if (!circuit_) throw ShapeMismatch("shared circuit state set needs a circuit");
  if (inputs_.empty()) throw InvalidBasisString("shared circuit needs at least one input");
  std::set<std::uint64_t> seen;
  for (const auto& s : inputs_) {
    if (!seen.insert(basis_index(s, circuit_->n_qubits())).second) {
      throw InvalidBasisString(fmt::format("duplicate basis input '{}'", s));
    }
  }
}

std::vector<DenseState> SharedCircuitStates::states(std::span<const double> params) const {
  return shared_circuit_states(*circuit_, params, inputs_);
}

std::vector<double> SharedCircuitStates::vjp(std::span<const double> params,
                                             const std::vector<DenseState>& cotangents) const {
  if (cotangents.size() != inputs_.size()) throw ShapeMismatch("one cotangent per input");
  std::vector<double> g(param_count(), 0.0);
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    DenseState in = DenseState::Zero(static_cast<Eigen::Index>(circuit_->dim()));
    in(static_cast<Eigen::Index>(basis_index(inputs_[k], circuit_->n_qubits()))) = 1.0;
    const auto gk = circuit_->run_vjp(params, in, cotangents[k]);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += gk[j];
  }
  return g;
}

std::vector<double> SharedCircuitStates::init(double sigma, std::uint64_t seed) const {
  return init_params(*circuit_, sigma, seed, 0).values;
}

nlohmann::json SharedCircuitStates::metadata() const {
  return {{"kind", "shared_circuit"}, {"ns", inputs_.size()}, {"inputs", inputs_},
          {"family", circuit_->metadata()}};
}

}  // namespace tracemin::ansatz
