#include "test_util.hpp"

#include "tracemin/errors.hpp"
#include "tracemin/subspace.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tracemin;
using namespace tracemin::subspace;

namespace {

std::vector<DenseState> random_states(std::size_t ns, Eigen::Index dim, std::uint64_t seed) {
  auto& g = testutil::rng(seed);
  std::vector<DenseState> out;
  for (std::size_t i = 0; i < ns; ++i) out.push_back(testutil::random_vector(g, dim));
  return out;
}

CMatrix columns(const std::vector<DenseState>& v) {
  CMatrix m(v.front().size(), static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

// Tr(S^-1 H) from dense matrices with an LU solve.
double dense_loss(const CMatrix& psi, const CMatrix& h) {
  const CMatrix s = psi.adjoint() * psi;
  const CMatrix hs = psi.adjoint() * h * psi;
  return s.fullPivLu().solve(hs).trace().real();
}

const hamiltonian::PauliSum& heis6() {
  static const auto h = hamiltonian::build_heisenberg(6, 1.0, 1.0, 1.0, 0.3, false);
  return h;
}

}  // namespace

TEST(Assemble, MatchesDenseProducts) {
  const auto states = random_states(4, 64, 1);
  const Operator h = heis6();
  const auto a = assemble(states, h);
  const CMatrix psi = columns(states);
  const CMatrix hd = hamiltonian::to_dense(h);
  EXPECT_LT((a.m.s.matrix() - psi.adjoint() * psi).norm(), 1e-10);
  EXPECT_LT((a.m.h.matrix() - psi.adjoint() * hd * psi).norm(), 1e-10);
  ASSERT_EQ(a.h_states.size(), 4u);
  EXPECT_LT((a.h_states[2] - hd * states[2]).norm(), 1e-12);
  EXPECT_GE(a.m.condition_s, 1.0);
}

TEST(Assemble, HermitianByConstruction) {
  const auto a = assemble(random_states(5, 64, 2), Operator{heis6()});
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_EQ(a.m.h(i, i).imag(), 0.0);
    EXPECT_EQ(a.m.s(i, i).imag(), 0.0);
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(a.m.h(i, j), std::conj(a.m.h(j, i)));
  }
}

TEST(Loss, MatchesDenseFormulaAndRitzSum) {
  const Operator h = heis6();
  for (std::uint64_t seed = 3; seed < 13; ++seed) {
    const auto states = random_states(3, 64, seed);
    const auto a = assemble(states, h);
    const double l = loss(a.m);
    EXPECT_NEAR(l, dense_loss(columns(states), hamiltonian::to_dense(h)), 1e-10 * std::abs(l) + 1e-12);
    const auto r = ritz_postprocess(a.m, states);
    EXPECT_NEAR(l, std::accumulate(r.energies.begin(), r.energies.end(), 0.0), 1e-10);
  }
}

TEST(Loss, InvariantUnderInvertibleMixing) {
  auto& g = testutil::rng(14);
  const Operator h = heis6();
  const auto states = random_states(4, 64, 15);
  const CMatrix m = testutil::random_matrix(g, 4, 4) + 2.0 * CMatrix::Identity(4, 4);
  const CMatrix mixed = columns(states) * m;
  std::vector<DenseState> mixed_states;
  for (Eigen::Index i = 0; i < 4; ++i) mixed_states.push_back(mixed.col(i));
  EXPECT_NEAR(loss(assemble(states, h).m), loss(assemble(mixed_states, h).m), 1e-9);
}

TEST(Loss, BoundedBelowBySumOfLowestEigenvalues) {
  const Operator h = heis6();
  const auto e = linalg::eigenvalues(HermitianMatrix::from_entries(hamiltonian::to_dense(h)));
  const double bound = e[0] + e[1] + e[2];
  for (std::uint64_t seed = 20; seed < 40; ++seed) {
    EXPECT_GE(loss(assemble(random_states(3, 64, seed), h).m), bound - 1e-10);
  }
}

TEST(Loss, DuplicatedStatesAreNotPositiveDefinite) {
  auto states = random_states(3, 64, 41);
  states[2] = states[0];
  const auto a = assemble(states, Operator{heis6()});
  EXPECT_THROW(loss(a.m), NotPositiveDefinite);
}

TEST(Cotangents, MatchFiniteDifferencesOfTheLoss) {
  const Operator h = heis6();
  const auto states = random_states(3, 64, 42);
  const auto cot = state_cotangents(assemble(states, h).m, states, h);
  const double step = 1e-6;
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (Eigen::Index k = 0; k < 64; k += 7) {
      for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
        auto up = states;
        auto dn = states;
        up[i](k) += step * dir;
        dn[i](k) -= step * dir;
        const double fd = (loss(assemble(up, h).m) - loss(assemble(dn, h).m)) / (2 * step);
        // dL = 2 Re(conj(dir) chi_ik) for a perturbation along dir e_k.
        const double an = 2.0 * (std::conj(dir) * cot[i](k)).real();
        worst = std::max(worst, std::abs(fd - an));
        scale = std::max(scale, std::abs(an));
      }
    }
  }
  EXPECT_LT(worst / scale, 1e-6);
}

TEST(Cotangents, MatchClosedMatrixForm) {
  const Operator h = heis6();
  const auto states = random_states(4, 64, 43);
  const auto a = assemble(states, h);
  const auto cot = state_cotangents(a.m, states, a.h_states);
  const CMatrix psi = columns(states);
  const CMatrix hd = hamiltonian::to_dense(h);
  const CMatrix s = psi.adjoint() * psi;
  const CMatrix hs = psi.adjoint() * hd * psi;
  const CMatrix si = s.inverse();
  const CMatrix ref = hd * psi * si - psi * si * hs * si;
  EXPECT_LT((columns(cot) - ref).norm() / ref.norm(), 1e-10);
}

TEST(Cotangents, VanishOnInvariantSubspaces) {
  const Operator h = heis6();
  const CMatrix hd = hamiltonian::to_dense(h);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hd);
  auto& g = testutil::rng(44);
  const CMatrix mix = testutil::random_matrix(g, 3, 3) + 2.0 * CMatrix::Identity(3, 3);
  const CMatrix basis = es.eigenvectors().leftCols(3) * mix;
  std::vector<DenseState> states;
  for (Eigen::Index i = 0; i < 3; ++i) states.push_back(basis.col(i));
  const auto cot = state_cotangents(assemble(states, h).m, states, h);
  for (const auto& c : cot) EXPECT_LT(c.norm(), 1e-8);
  const double l = loss(assemble(states, h).m);
  EXPECT_NEAR(l, es.eigenvalues().head(3).sum(), 1e-10);
}

TEST(Cotangents, DimensionMismatch) {
  const auto states = random_states(3, 64, 45);
  const auto a = assemble(states, Operator{heis6()});
  std::vector<DenseState> two(states.begin(), states.begin() + 2);
  EXPECT_THROW(state_cotangents(a.m, two, a.h_states), DimensionMismatch);
}

TEST(RitzPostprocess, StatesAreOrthonormalRitzVectors) {
  const Operator h = heis6();
  const auto states = random_states(4, 64, 46);
  const auto a = assemble(states, h);
  const auto r = ritz_postprocess(a.m, states);
  ASSERT_EQ(r.states.size(), 4u);
  EXPECT_TRUE(std::is_sorted(r.energies.begin(), r.energies.end()));
  const CMatrix hd = hamiltonian::to_dense(h);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(hamiltonian::matrix_element(h, r.states[i], r.states[i]).real(), r.energies[i], 1e-10);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_LT(std::abs(r.states[i].dot(r.states[j]) - (i == j ? 1.0 : 0.0)), 1e-10);
      if (i != j) EXPECT_LT(std::abs(r.states[i].dot(hd * r.states[j])), 1e-9);
    }
  }
}

TEST(VqeLoss, SumOfExpectationValues) {
  const Operator h = heis6();
  const auto states = random_states(3, 64, 47);
  double ref = 0.0;
  for (const auto& s : states) ref += hamiltonian::matrix_element(h, s, s).real();
  EXPECT_NEAR(subspace_vqe_loss(states, h), ref, 1e-12);

  // Basis inputs through the identity circuit give diagonal entries.
  const ansatz::Circuit c(6, 1);
  const std::vector<double> zero(c.param_count(), 0.0);
  const CMatrix hd = hamiltonian::to_dense(h);
  EXPECT_NEAR(subspace_vqe_loss(c, zero, {"000000", "010101"}, h),
              hd(0, 0).real() + hd(0b010101, 0b010101).real(), 1e-12);
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  const Operator h = heis6();
  const ansatz::IndependentStates ind(ansatz::periodic_mps(6, 2), 3);
  const ansatz::SharedCircuitStates shared(std::make_shared<ansatz::Circuit>(6, 2),
                                           {"000000", "000001", "100000"});
  const TraceObjective trace(ind, h);
  const VqeObjective vqe(shared, h);
  auto check = [](const auto& obj, const std::vector<double>& p) {
    const auto e = obj(p);
    const auto fd = optim::fd_gradient([&](std::span<const double> x) { return obj.value(x); }, p, 1e-5);
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      worst = std::max(worst, std::abs(fd[k] - e.gradient[k]));
      scale = std::max(scale, std::abs(e.gradient[k]));
    }
    EXPECT_NEAR(e.loss, obj.value(p), 1e-12 * std::abs(e.loss));
    return worst / scale;
  };
  EXPECT_LT(check(trace, ind.init(0.5, 1)), 1e-6);
  EXPECT_LT(check(vqe, shared.init(0.5, 2)), 1e-6);
}

TEST(Objectives, CollapsedStatesGiveInfiniteLoss) {
  const Operator h = heis6();
  const ansatz::IndependentStates ind(std::make_shared<ansatz::DenseTable>(64, false), 2);
  std::vector<double> p(128, 0.0);
  p[3] = 1.0;
  p[64 + 3] = 2.0;
  const TraceObjective trace(ind, h);
  const auto e = trace(p);
  EXPECT_TRUE(std::isinf(e.loss));
  EXPECT_TRUE(e.gradient.empty());
}
