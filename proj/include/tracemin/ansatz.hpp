#pragma once

#include "tracemin/hamiltonian.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tracemin::ansatz {

/// Parameters of one variational state.
struct ParamVector {
  std::vector<double> values;
  std::string family_id;
  std::size_t state_index = 0;
};

/// A parameterized family of dense states.
///
/// `vjp` pulls a state-space cotangent c back to parameter space:
/// g[k] = 2 Re <c | d state / d params[k]>. With c = dL/d<psi| this is the
/// gradient of a real loss L.
class Family {
 public:
  virtual ~Family() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual DenseState state(std::span<const double> params) const = 0;
  virtual std::vector<double> vjp(std::span<const double> params,
                                  const DenseState& cotangent) const = 0;
  virtual nlohmann::json metadata() const;

 protected:
  void check_params(std::span<const double> params) const;
  void check_cotangent(const DenseState& cotangent) const;
};

/// Every amplitude is a free parameter. Complex tables list (re, im) pairs.
class DenseTable final : public Family {
 public:
  explicit DenseTable(std::size_t dim, bool complex = true);

  std::string id() const override { return "dense_table"; }
  std::size_t dim() const override { return dim_; }
  std::size_t param_count() const override { return complex_ ? 2 * dim_ : dim_; }
  DenseState state(std::span<const double> params) const override;
  std::vector<double> vjp(std::span<const double> params,
                          const DenseState& cotangent) const override;
  nlohmann::json metadata() const override;

 private:
  std::size_t dim_;
  bool complex_;
};

enum class Boundary { open, periodic };

/// Explicit MPS cores: cores[site][s] is a (left bond x right bond) matrix.
struct MpsTensors {
  Boundary boundary = Boundary::open;
  std::vector<std::array<CMatrix, 2>> cores;

  std::size_t n_sites() const noexcept { return cores.size(); }
};

struct MpsShape {
  std::size_t n_sites = 2;
  std::size_t bond_dim = 1;
  Boundary boundary = Boundary::open;
  bool complex = false;
};

/// Matrix product state with physical dimension 2. Open chains cap every
/// bond at the largest rank the bipartition supports, which makes the
/// open family also the quantics tensor train over grid bits.
class Mps final : public Family {
 public:
  explicit Mps(MpsShape shape, std::string id = "");

  std::string id() const override { return id_; }
  std::size_t dim() const override { return std::size_t{1} << shape_.n_sites; }
  std::size_t param_count() const override { return offsets_.back(); }
  DenseState state(std::span<const double> params) const override;
  std::vector<double> vjp(std::span<const double> params,
                          const DenseState& cotangent) const override;
  nlohmann::json metadata() const override;

  const MpsShape& shape() const noexcept { return shape_; }
  std::size_t left_dim(std::size_t site) const noexcept { return left_[site]; }
  std::size_t right_dim(std::size_t site) const noexcept { return right_[site]; }
  std::size_t offset(std::size_t site) const noexcept { return offsets_[site]; }

  MpsTensors tensors(std::span<const double> params) const;

 private:
  MpsShape shape_;
  std::string id_;
  std::vector<std::size_t> left_;
  std::vector<std::size_t> right_;
  std::vector<std::size_t> offsets_;
};

std::unique_ptr<Mps> open_mps(std::size_t n_sites, std::size_t bond_dim, bool complex = false);
std::unique_ptr<Mps> periodic_mps(std::size_t n_sites, std::size_t bond_dim, bool complex = false);
std::unique_ptr<Mps> quantics_tt(std::size_t n_bits, std::size_t max_rank, bool complex = false);

/// <a|b> through transfer matrices: a boundary-vector sweep for open
/// chains, products of (chi^2 x chi^2) transfer matrices for periodic ones.
cplx mps_pair_overlap(const MpsTensors& a, const MpsTensors& b);

/// Amplitudes of explicit tensors by a direct loop over all bitstrings.
DenseState mps_contract_naive(const MpsTensors& t);

/// Parses a basis string like "0110" (site 0 first) into an amplitude index.
std::uint64_t basis_index(std::string_view bits, std::size_t n_qubits);

/// Hardware-efficient circuit. Each block applies, for every qubit in turn,
/// R_y R_z R_x (R_a(t) = exp(-i t a / 2)), then for every adjacent pair
/// (j, j+1) the entanglers exp(i t ZZ), exp(i t XX), exp(i t YY).
/// Parameters are ordered block-major as listed.
class Circuit final : public Family {
 public:
  Circuit(std::size_t n_qubits, std::size_t depth, std::string input_state = "");

  std::string id() const override { return "circuit"; }
  std::size_t dim() const override { return std::size_t{1} << n_; }
  std::size_t param_count() const override { return gates_.size(); }
  DenseState state(std::span<const double> params) const override;
  std::vector<double> vjp(std::span<const double> params,
                          const DenseState& cotangent) const override;
  nlohmann::json metadata() const override;

  std::size_t n_qubits() const noexcept { return n_; }
  std::size_t depth() const noexcept { return depth_; }

  /// V(params) applied to an arbitrary input state.
  DenseState run(std::span<const double> params, DenseState input) const;
  /// Adjoint-mode gradient of 2 Re <cotangent | V(params) input>.
  std::vector<double> run_vjp(std::span<const double> params, const DenseState& input,
                              const DenseState& cotangent) const;

 private:
  struct Gate {
    std::uint64_t x_mask;
    std::uint64_t z_mask;
    int y_count;
    double scale;  // angle = scale * parameter
  };

  std::size_t n_;
  std::size_t depth_;
  std::string input_;
  std::vector<Gate> gates_;

  void apply_gate(const Gate& g, double angle, DenseState& psi) const;
  cplx pauli_overlap(const Gate& g, const DenseState& bra, const DenseState& ket) const;
};

/// {V(phi)|s_k>} for distinct basis strings s_k.
std::vector<DenseState> shared_circuit_states(const Circuit& circuit, std::span<const double> phi,
                                              const std::vector<std::string>& inputs);

// Parameter initialization

/// Deterministic subseed for stream `index` of `seed`.
std::uint64_t subseed(std::uint64_t seed, std::uint64_t index);

/// i.i.d. N(0, sigma^2) draws; state i uses subseed(seed, i).
ParamVector init_params(const Family& family, double sigma, std::uint64_t seed,
                        std::size_t state_index);

/// The full set of N_s states driven by one pooled parameter vector.
class StateSet {
 public:
  virtual ~StateSet() = default;

  virtual std::string id() const = 0;
  virtual std::size_t ns() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::vector<DenseState> states(std::span<const double> params) const = 0;
  virtual std::vector<double> vjp(std::span<const double> params,
                                  const std::vector<DenseState>& cotangents) const = 0;
  virtual std::vector<double> init(double sigma, std::uint64_t seed) const = 0;
  virtual nlohmann::json metadata() const = 0;
};

/// N_s states with disjoint parameter blocks from one family.
class IndependentStates final : public StateSet {
 public:
  IndependentStates(std::shared_ptr<const Family> family, std::size_t ns);

  std::string id() const override { return family_->id(); }
  std::size_t ns() const override { return ns_; }
  std::size_t dim() const override { return family_->dim(); }
  std::size_t param_count() const override { return ns_ * family_->param_count(); }
  std::vector<DenseState> states(std::span<const double> params) const override;
  std::vector<double> vjp(std::span<const double> params,
                          const std::vector<DenseState>& cotangents) const override;
  std::vector<double> init(double sigma, std::uint64_t seed) const override;
  nlohmann::json metadata() const override;

  const Family& family() const noexcept { return *family_; }

 private:
  std::shared_ptr<const Family> family_;
  std::size_t ns_;
};

/// One circuit fed with distinct basis inputs (subspace-VQE states).
class SharedCircuitStates final : public StateSet {
 public:
  SharedCircuitStates(std::shared_ptr<const Circuit> circuit, std::vector<std::string> inputs);

  std::string id() const override { return "shared_circuit"; }
  std::size_t ns() const override { return inputs_.size(); }
  std::size_t dim() const override { return circuit_->dim(); }
  std::size_t param_count() const override { return circuit_->param_count(); }
  std::vector<DenseState> states(std::span<const double> params) const override;
  std::vector<double> vjp(std::span<const double> params,
                          const std::vector<DenseState>& cotangents) const override;
  std::vector<double> init(double sigma, std::uint64_t seed) const override;
  nlohmann::json metadata() const override;

  const std::vector<std::string>& inputs() const noexcept { return inputs_; }

 private:
  std::shared_ptr<const Circuit> circuit_;
  std::vector<std::string> inputs_;
};

}  // namespace tracemin::ansatz
