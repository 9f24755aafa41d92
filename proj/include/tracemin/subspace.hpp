#pragma once

#include "tracemin/ansatz.hpp"
#include "tracemin/hamiltonian.hpp"
#include "tracemin/linalg.hpp"
#include "tracemin/optim.hpp"

#include <span>
#include <vector>

namespace tracemin::subspace {

using hamiltonian::Operator;
using linalg::HermitianMatrix;

/// S_ij = <psi_i|psi_j> and H_ij = <psi_i|H|psi_j> over the N_s states.
struct SubspaceMatrices {
  std::size_t ns = 0;
  HermitianMatrix s;
  HermitianMatrix h;
  double condition_s = 1.0;
};

/// Assembled matrices plus the H|psi_j> products used to build them.
struct Assembly {
  SubspaceMatrices m;
  std::vector<DenseState> h_states;
};

struct AssembledEigenstates {
  std::vector<double> energies;
  CMatrix coeffs;
  std::vector<DenseState> states;  // |Psi_a> = sum_i c_ia |psi_i>
};

/// One operator application per state, upper triangle by inner products,
/// lower triangle mirrored.
Assembly assemble(const std::vector<DenseState>& states, const Operator& h);

/// Tr(S^{-1} H).
double loss(const SubspaceMatrices& m, const linalg::Regularization& reg = {},
            linalg::RegularizationLog* log = nullptr);

/// dL/d<psi_i| for every state:
/// chi_i = sum_j (S^-1)_ji H|psi_j> - (S^-1 H S^-1)_ji |psi_j>,
/// so that dL = sum_i 2 Re <d psi_i | chi_i>.
std::vector<DenseState> state_cotangents(const SubspaceMatrices& m,
                                         const std::vector<DenseState>& states,
                                         const std::vector<DenseState>& h_states,
                                         const linalg::Regularization& reg = {});

std::vector<DenseState> state_cotangents(const SubspaceMatrices& m,
                                         const std::vector<DenseState>& states,
                                         const Operator& h);

AssembledEigenstates ritz_postprocess(const SubspaceMatrices& m,
                                      const std::vector<DenseState>& states);

/// Uniformly weighted sum of <psi_k|H|psi_k> over the given states.
double subspace_vqe_loss(const std::vector<DenseState>& states, const Operator& h);

double subspace_vqe_loss(const ansatz::Circuit& circuit, std::span<const double> phi,
                         const std::vector<std::string>& inputs, const Operator& h);

using optim::Evaluation;

/// Trace loss over any state set. A non-positive-definite overlap yields
/// loss = +inf and an empty gradient, so that line searches back off.
class TraceObjective {
 public:
  TraceObjective(const ansatz::StateSet& states, const Operator& h,
                 linalg::Regularization reg = {});

  Evaluation operator()(std::span<const double> params) const;
  double value(std::span<const double> params) const;

  const linalg::RegularizationLog& log() const noexcept { return log_; }

 private:
  const ansatz::StateSet& states_;
  const Operator& h_;
  linalg::Regularization reg_;
  mutable linalg::RegularizationLog log_;
};

/// Subspace-VQE baseline: sum of energies of the (orthonormal) states with
/// cotangents H|psi_k>.
class VqeObjective {
 public:
  VqeObjective(const ansatz::StateSet& states, const Operator& h);

  Evaluation operator()(std::span<const double> params) const;
  double value(std::span<const double> params) const;

 private:
  const ansatz::StateSet& states_;
  const Operator& h_;
};

}  // namespace tracemin::subspace
