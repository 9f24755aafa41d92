// Acceptance runs. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [--workdir DIR] [--only 1,5,9]

#include "test_util.hpp"

#include "tracemin/errors.hpp"
#include "tracemin/experiment.hpp"
#include "tracemin/oracle.hpp"
#include "tracemin/subspace.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
namespace ex = tracemin::experiment;
namespace orc = tracemin::oracle;
using tracemin::CMatrix;
using tracemin::DenseState;
using tracemin::hamiltonian::Operator;
using tracemin::linalg::HermitianMatrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_workdir = "acceptance_runs";
std::map<int, ex::RunSummary> g_runs;  // runs reused by criteria 4 and 10

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

ex::RunConfig config(const std::string& text, const std::string& dir) {
  auto c = ex::parse_config(text);
  c.output_dir = g_workdir / dir;
  fs::remove_all(c.output_dir);
  return c;
}

const ex::RunSummary& run_once(int id, const std::string& text, const std::string& dir) {
  auto it = g_runs.find(id);
  if (it == g_runs.end()) {
    it = g_runs.emplace(id, ex::run(config(text, dir), {.jobs = 1, .quiet = true})).first;
  }
  return it->second;
}

const char* kRun1 = R"([run]
experiment = heisenberg
seed = 101
trials = 1
ns = 4
init_sigma = 1.0
audit_every = 25

[system]
n = 8
jx = 1
jy = 1
jz = 1
periodic = true

[ansatz]
family = dense_table

[optimizer]
max_steps = 500
)";

std::string mps_run(double jx, double jy, double jz, double hz) {
  return fmt::format(R"([run]
experiment = heisenberg
seed = 202
trials = 3
ns = 8
init_sigma = 1.0
audit_every = 100

[system]
n = 12
jx = {}
jy = {}
jz = {}
hz = {}
periodic = true

[ansatz]
family = periodic_mps
bond_dim = 12

[optimizer]
max_steps = 3000
)",
                     jx, jy, jz, hz);
}

const ex::RunSummary& run1() { return run_once(1, kRun1, "c1_dense_table"); }
const ex::RunSummary& run2() { return run_once(2, mps_run(1, 1, 1, 0), "c2_isotropic_mps"); }
const ex::RunSummary& run3() {
  return run_once(3, mps_run(1, 0.95, 0.8, 0.015), "c3_anisotropic_mps");
}

Outcome levels_within(const ex::RunSummary& s, double tol) {
  if (!s.best) return {false, "every trial failed"};
  const auto& b = s.trials[*s.best];
  const double worst = max_of(b.rel_errors);
  return {b.rel_errors.size() == s.config.ns && worst < tol,
          fmt::format("best trial {} of {}, {} levels, max relative error {:.3e} (< {:.0e})",
                      b.index, s.trials.size(), b.rel_errors.size(), worst, tol)};
}

Outcome criterion1() { return levels_within(run1(), 1e-8); }
Outcome criterion2() { return levels_within(run2(), 1e-4); }
Outcome criterion3() { return levels_within(run3(), 1e-4); }

Outcome criterion4() {
  std::size_t audited = 0;
  std::size_t bad = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (const auto* s : {&run1(), &run2(), &run3()}) {
    for (const auto& t : s->trials) {
      for (const auto& a : t.audits) {
        ++audited;
        bad += a.violations;
        min_margin = std::min(min_margin, a.min_margin);
      }
    }
    if (s->ritz_violation) ++bad;
  }

  // Random subspaces of random six-qubit Hamiltonians.
  std::size_t prop_bad = 0;
  std::mt19937_64 g(404);
  std::uniform_int_distribution<int> op(0, 3);
  std::normal_distribution<double> coef;
  for (int trial = 0; trial < 100; ++trial) {
    tracemin::hamiltonian::PauliSum h(6);
    for (int t = 0; t < 20; ++t) {
      std::string w(6, 'I');
      for (auto& ch : w) ch = "IXYZ"[op(g)];
      h.add(tracemin::hamiltonian::PauliString(coef(g), w));
    }
    const Operator hop{h};
    const std::size_t ns = 1 + static_cast<std::size_t>(trial % 8);
    std::vector<DenseState> states;
    for (std::size_t i = 0; i < ns; ++i) states.push_back(testutil::random_vector(g, 64));
    const auto r = tracemin::subspace::ritz_postprocess(
        tracemin::subspace::assemble(states, hop).m, states);
    const auto a = orc::ritz_audit(r.energies, orc::exact_spectrum(hop, ns), 1e-10);
    prop_bad += a.violations;
    for (const auto& e : a.entries) min_margin = std::min(min_margin, e.margin);
  }
  return {bad == 0 && prop_bad == 0 && audited > 0,
          fmt::format("{} audited steps in runs 1-3 with {} violations; 100 random subspaces "
                      "with {} violations; smallest margin {:.3e}",
                      audited, bad, prop_bad, min_margin)};
}

double e0_gap(std::size_t nd) {
  const tracemin::hamiltonian::MorseParams p;
  const auto g = tracemin::hamiltonian::build_morse_grid(nd, 0.0, 10.0, p);
  const double e = orc::morse_analytic(0, p.de, p.am, p.mu);
  const double grid = nd <= 12 ? orc::exact_spectrum(Operator{g}, 1).energies[0]
                               : orc::grid_lowest_eigenvalues(g, 1)[0];
  return std::abs(grid - e) / e;
}

Outcome criterion5() {
  const double g16 = e0_gap(16);
  const double g18 = e0_gap(18);
  const bool ok16 = g16 >= 0.5 * 1.5e-7 && g16 <= 1.5 * 1.5e-7;
  const bool ok18 = g18 <= 1e-8 && g18 >= 0.5 * 9.3e-9 && g18 <= 1.5 * 9.3e-9;
  // Dense ED at small grids: gap shrinks about 4x per added bit.
  const double g10 = e0_gap(10);
  const double g11 = e0_gap(11);
  const double g12 = e0_gap(12);
  const bool scaling = std::abs(g10 / g11 - 4.0) < 0.2 && std::abs(g11 / g12 - 4.0) < 0.2;
  return {ok16 && ok18 && scaling,
          fmt::format("gap Nd=16 {:.3e} (reference 1.5e-7), Nd=18 {:.3e} (reference 9.3e-9); "
                      "dense ED ratios Nd=10/11 {:.3f}, 11/12 {:.3f}",
                      g16, g18, g10 / g11, g11 / g12)};
}

Outcome criterion6() {
  const char* text = R"([run]
experiment = morse
seed = 606
trials = 1
ns = 8
init_sigma = 0.02
audit_every = 500

[system]
nd = 10

[ansatz]
family = quantics_tt
bond_dim = 32

[optimizer]
max_steps = 20000
)";
  const auto& s = run_once(6, text, "c6_morse_tt");
  auto o = levels_within(s, 1e-4);
  if (s.ritz_violation) o.pass = false;
  return o;
}

Outcome criterion7() {
  const char* text = R"([run]
experiment = hubbard
seed = 707
trials = 5
ns = 4
init_sigma = 0.01

[system]
lx = 2
ly = 2
t = 1
u = 4

[ansatz]
family = circuit
depth = 3

[optimizer]
max_steps = 1000
)";
  const auto r = ex::compare_baseline(config(text, "c7_hubbard"), {.jobs = 1, .quiet = true});
  const double tl = r.trials[r.best_trace].trace_final_loss;
  const double bl = r.trials[r.best_baseline].baseline_final_loss;
  bool errors_ok = r.trace_rel_errors.size() == 4;
  std::string errs;
  for (std::size_t k = 0; k < r.trace_rel_errors.size(); ++k) {
    errors_ok = errors_ok && r.trace_rel_errors[k] <= r.baseline_rel_errors[k];
    errs += fmt::format(" {:.2e}/{:.2e}", r.trace_rel_errors[k], r.baseline_rel_errors[k]);
  }
  return {tl <= bl && errors_ok,
          fmt::format("best final loss trace {:.6f} vs baseline {:.6f}; rel errors trace/baseline:{}",
                      tl, bl, errs)};
}

Outcome criterion8() {
  double worst = 0.0;
  std::string parts;
  bool ok = true;
  for (const std::string fam :
       {"dense_table", "open_mps", "periodic_mps", "quantics_tt", "circuit", "shared_circuit"}) {
    const auto c = ex::parse_config(
        "[run]\nexperiment = heisenberg\nseed = 808\nns = 3\n[system]\nn = 8\n"
        "[ansatz]\nfamily = " + fam + "\nbond_dim = 4\ndepth = 2\n");
    const auto r = ex::gradcheck(c, 64, 1e-5);
    ok = ok && r.coords.size() >= 64 && r.max_rel_deviation < 1e-6;
    worst = std::max(worst, r.max_rel_deviation);
    parts += fmt::format(" {}={:.1e}", fam, r.max_rel_deviation);
  }
  return {ok, fmt::format("dim 256, 64 coordinates each, max deviation {:.2e}:{}", worst, parts)};
}

Outcome criterion9() {
  auto& g = testutil::rng(909);
  double trace_gap = 0.0;
  double loss_shift = 0.0;
  double ritz_shift = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index ns = 1 + trial % 8;
    const CMatrix s = testutil::random_spd(g, ns);
    const CMatrix h = testutil::random_hermitian(g, ns);
    const CMatrix m = testutil::random_matrix(g, ns, ns) + 3.0 * CMatrix::Identity(ns, ns);
    const auto hs = HermitianMatrix::from_upper(h);
    const auto ss = HermitianMatrix::from_upper(s);
    tracemin::subspace::SubspaceMatrices a{static_cast<std::size_t>(ns), ss, hs, 1.0};
    tracemin::subspace::SubspaceMatrices b{static_cast<std::size_t>(ns),
                                           HermitianMatrix::from_upper(m.adjoint() * s * m),
                                           HermitianMatrix::from_upper(m.adjoint() * h * m), 1.0};
    const double la = tracemin::subspace::loss(a);
    const double lb = tracemin::subspace::loss(b);
    const auto ea = tracemin::linalg::gevp(hs, ss).energies;
    const auto eb = tracemin::linalg::gevp(b.h, b.s).energies;
    double sum = 0.0;
    for (std::size_t k = 0; k < ea.size(); ++k) {
      sum += ea[k];
      ritz_shift = std::max(ritz_shift, std::abs(ea[k] - eb[k]));
    }
    trace_gap = std::max(trace_gap, std::abs(la - sum));
    loss_shift = std::max(loss_shift, std::abs(la - lb));
  }
  return {trace_gap <= 1e-10 && loss_shift <= 1e-10 && ritz_shift <= 1e-10,
          fmt::format("200 instances: |L - sum E| {:.2e}, loss change {:.2e}, Ritz change {:.2e}",
                      trace_gap, loss_shift, ritz_shift)};
}

Outcome criterion10() {
  const auto& s1 = run1();
  const auto& s2 = run2();
  if (!s1.best || !s2.best) return {false, "missing best trial"};
  const double v1 = max_of(s1.trials[*s1.best].variances);
  const double rv2 = max_of(s2.trials[*s2.best].rel_variances);
  const bool fit_ok = s2.error_fit && s2.error_fit->slope >= 0.0;
  return {v1 < 1e-10 && rv2 < 1e-4 && fit_ok,
          fmt::format("run 1 max variance {:.2e} (< 1e-10); run 2 max relative variance {:.2e} "
                      "(< 1e-4); run 2 error fit slope {:.3e}, intercept {:.3e}, r2 {:.3f}",
                      v1, rv2, s2.error_fit ? s2.error_fit->slope : 0.0,
                      s2.error_fit ? s2.error_fit->intercept : 0.0,
                      s2.error_fit ? s2.error_fit->r2 : 0.0)};
}

int cli(const std::string& args) {
  const std::string cmd = std::string(TRACEMIN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome criterion11() {
  const auto dir = g_workdir / "c11_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string text = kRun1;
  text.replace(text.find("trials = 1"), 10, "trials = 3");
  std::ofstream(dir / "run.ini") << text;
  std::vector<std::string> summaries;
  std::vector<std::string> energies;
  for (int jobs : {1, 3, 1}) {
    const auto out = dir / fmt::format("out_jobs{}_{}", jobs, summaries.size());
    const int rc = cli(fmt::format("run --config {} --jobs {} --output {}", (dir / "run.ini").string(),
                                   jobs, out.string()));
    if (rc != 0) return {false, fmt::format("tracemin run exited with {}", rc)};
    summaries.push_back(slurp(out / "summary.json"));
    std::string all;
    for (const char* f : {"energies.csv", "trial_000/energies.csv", "trial_001/energies.csv",
                          "trial_002/energies.csv"}) {
      all += slurp(out / f);
    }
    energies.push_back(all);
  }
  const bool same = summaries[0] == summaries[1] && summaries[0] == summaries[2] &&
                    energies[0] == energies[1] && energies[0] == energies[2] &&
                    !summaries[0].empty();
  return {same, fmt::format("3 CLI runs (--jobs 1, 3, 1): summary.json {} bytes, energies.csv {}",
                            summaries[0].size(), same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      g_workdir = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      fmt::print(stderr, "usage: acceptance [--workdir DIR] [--only 1,2,...]\n");
      return 2;
    }
  }
  fs::create_directories(g_workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exactness ceiling (N=8 dense table)", criterion1},
      {"periodic MPS N=12 chi=12 Ns=8", criterion2},
      {"anisotropic periodic MPS N=12", criterion3},
      {"Ritz upper bounds", criterion4},
      {"Morse discretization anchors", criterion5},
      {"Morse quantics TT Nd=10 chi=32", criterion6},
      {"Hubbard 2x2 trace loss vs subspace VQE", criterion7},
      {"gradient correctness", criterion8},
      {"loss identities", criterion9},
      {"diagnostics", criterion10},
      {"determinism", criterion11},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("{} [{}] {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
               o.detail, secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
