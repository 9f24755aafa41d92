#include "tracemin/subspace.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace tracemin::subspace {

namespace {

CMatrix pack_columns(const std::vector<DenseState>& states) {
  CMatrix m(states.front().size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = states[j];
  return m;
}

std::vector<DenseState> unpack_columns(const CMatrix& m) {
  std::vector<DenseState> out;
  out.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.emplace_back(m.col(j));
  return out;
}

void check_states(const std::vector<DenseState>& states, const Operator& h) {
  if (states.empty()) throw DimensionMismatch("need at least one state");
  const auto d = static_cast<Eigen::Index>(hamiltonian::dim(h));
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != d) {
      throw DimensionMismatch(
          fmt::format("state {} has {} amplitudes, operator acts on {}", i, states[i].size(), d));
    }
  }
}

}  // namespace

Assembly assemble(const std::vector<DenseState>& states, const Operator& h) {
  check_states(states, h);
  const std::size_t ns = states.size();
  Assembly out;
  out.h_states.reserve(ns);
  for (const auto& psi : states) out.h_states.push_back(hamiltonian::apply(h, psi));

  const auto n = static_cast<Eigen::Index>(ns);
  CMatrix s(n, n);
  CMatrix hm(n, n);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = i; j < ns; ++j) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      s(a, b) = states[i].dot(states[j]);
      hm(a, b) = states[i].dot(out.h_states[j]);
    }
  }
  out.m.ns = ns;
  out.m.s = HermitianMatrix::from_upper(s);
  out.m.h = HermitianMatrix::from_upper(hm);
  out.m.condition_s = linalg::condition_number(out.m.s);
  return out;
}

double loss(const SubspaceMatrices& m, const linalg::Regularization& reg,
            linalg::RegularizationLog* log) {
  return linalg::trace_inv_product(m.s, m.h, reg, log);
}

std::vector<DenseState> state_cotangents(const SubspaceMatrices& m,
                                         const std::vector<DenseState>& states,
                                         const std::vector<DenseState>& h_states,
                                         const linalg::Regularization& reg) {
  if (states.size() != m.ns || h_states.size() != m.ns) {
    throw DimensionMismatch("state_cotangents: state count differs from matrix size");
  }
  const auto chol = linalg::cholesky(m.s, reg, nullptr);
  const CMatrix psi = pack_columns(states);
  const CMatrix hpsi = pack_columns(h_states);
  // X = (H Psi - Psi S^-1 H) S^-1, the right factor applied as a solve on X^H.
  const CMatrix y = chol.solve(m.h.matrix());
  const CMatrix residual = hpsi - psi * y;
  const CMatrix x = chol.solve(residual.adjoint()).adjoint();
  return unpack_columns(x);
}

std::vector<DenseState> state_cotangents(const SubspaceMatrices& m,
                                         const std::vector<DenseState>& states,
                                         const Operator& h) {
  check_states(states, h);
  std::vector<DenseState> h_states;
  h_states.reserve(states.size());
  for (const auto& psi : states) h_states.push_back(hamiltonian::apply(h, psi));
  return state_cotangents(m, states, h_states);
}

AssembledEigenstates ritz_postprocess(const SubspaceMatrices& m,
                                      const std::vector<DenseState>& states) {
  if (states.size() != m.ns) throw DimensionMismatch("ritz_postprocess: state count mismatch");
  const auto sol = linalg::gevp(m.h, m.s);
  AssembledEigenstates out;
  out.energies = sol.energies;
  out.coeffs = sol.coeffs;
  out.states = unpack_columns(pack_columns(states) * sol.coeffs);
  return out;
}

double subspace_vqe_loss(const std::vector<DenseState>& states, const Operator& h) {
  check_states(states, h);
  double total = 0.0;
  for (const auto& psi : states) total += hamiltonian::matrix_element(h, psi, psi).real();
  return total;
}

double subspace_vqe_loss(const ansatz::Circuit& circuit, std::span<const double> phi,
                         const std::vector<std::string>& inputs, const Operator& h) {
  return subspace_vqe_loss(ansatz::shared_circuit_states(circuit, phi, inputs), h);
}

// ---------------------------------------------------------------- objectives

TraceObjective::TraceObjective(const ansatz::StateSet& states, const Operator& h,
                               linalg::Regularization reg)
    : states_(states), h_(h), reg_(reg) {
  if (states_.dim() != hamiltonian::dim(h_)) {
    throw DimensionMismatch(fmt::format("state set dimension {} differs from operator dimension {}",
                                        states_.dim(), hamiltonian::dim(h_)));
  }
}

Evaluation TraceObjective::operator()(std::span<const double> params) const {
  const auto psi = states_.states(params);
  const auto a = assemble(psi, h_);
  Evaluation e;
  e.condition_s = a.m.condition_s;
  try {
    e.loss = loss(a.m, reg_, &log_);
    const auto cot = state_cotangents(a.m, psi, a.h_states, reg_);
    e.gradient = states_.vjp(params, cot);
  } catch (const NotPositiveDefinite&) {
    e.loss = std::numeric_limits<double>::infinity();
    e.gradient.clear();
  }
  return e;
}

double TraceObjective::value(std::span<const double> params) const {
  const auto a = assemble(states_.states(params), h_);
  try {
    return loss(a.m, reg_, &log_);
  } catch (const NotPositiveDefinite&) {
    return std::numeric_limits<double>::infinity();
  }
}

VqeObjective::VqeObjective(const ansatz::StateSet& states, const Operator& h)
    : states_(states), h_(h) {
  if (states_.dim() != hamiltonian::dim(h_)) {
    throw DimensionMismatch("state set dimension differs from operator dimension");
  }
}

Evaluation VqeObjective::operator()(std::span<const double> params) const {
  const auto psi = states_.states(params);
  Evaluation e;
  std::vector<DenseState> cot;
  cot.reserve(psi.size());
  e.loss = 0.0;
  for (const auto& p : psi) {
    cot.push_back(hamiltonian::apply(h_, p));
    e.loss += p.dot(cot.back()).real();
  }
  e.gradient = states_.vjp(params, cot);
  const auto n = static_cast<Eigen::Index>(psi.size());
  CMatrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      s(i, j) = psi[static_cast<std::size_t>(i)].dot(psi[static_cast<std::size_t>(j)]);
    }
  }
  e.condition_s = linalg::condition_number(HermitianMatrix::from_upper(s));
  return e;
}

double VqeObjective::value(std::span<const double> params) const {
  return subspace_vqe_loss(states_.states(params), h_);
}

}  // namespace tracemin::subspace
