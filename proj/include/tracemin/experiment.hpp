#pragma once

#include "tracemin/ansatz.hpp"
#include "tracemin/hamiltonian.hpp"
#include "tracemin/optim.hpp"
#include "tracemin/oracle.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracemin::experiment {

enum class ExperimentKind { heisenberg, morse, hubbard, custom };

std::string to_string(ExperimentKind k);

/// Parsed run configuration. The INI text is kept verbatim in `text`.
///
///   [run]       experiment, seed, trials, ns, init_sigma, output, jitter,
///               kappa_abort, audit_every, ritz_tol
///   [system]    heisenberg: n, jx, jy, jz, hz, periodic
///               morse:      nd, x_min, x_max, de, am, re, mu
///               hubbard:    lx, ly, t, u, ordering
///               custom:     hamiltonian_file
///   [ansatz]    family, bond_dim, depth, complex, inputs
///   [optimizer] memory, max_steps, wolfe_c1, wolfe_c2, grad_tol, max_linesearch
///   [baseline]  inputs
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::heisenberg;

  std::size_t n = 8;
  double jx = 1.0;
  double jy = 1.0;
  double jz = 1.0;
  double hz = 0.0;
  bool periodic = true;

  std::size_t nd = 10;
  double x_min = 0.0;
  double x_max = 10.0;
  hamiltonian::MorseParams morse;

  std::size_t lx = 2;
  std::size_t ly = 2;
  double t = 1.0;
  double u = 4.0;
  hamiltonian::HubbardOrdering ordering = hamiltonian::HubbardOrdering::spin_major;

  std::filesystem::path hamiltonian_file;

  std::string family = "dense_table";
  std::size_t bond_dim = 4;
  std::size_t depth = 2;
  bool complex = false;
  std::vector<std::string> inputs;           // shared_circuit inputs
  std::vector<std::string> baseline_inputs;  // compare-baseline inputs

  std::size_t ns = 4;
  double init_sigma = 1.0;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::filesystem::path output_dir = "tracemin_out";
  double jitter = 0.0;
  double kappa_abort = 1e12;  // 0 disables
  std::size_t audit_every = 0;
  double ritz_tol = 1e-10;

  optim::OptimizerConfig optimizer;

  std::string text;
};

/// Throws ConfigError on syntax errors, unknown or unused keys and invalid
/// values. Relative file paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

hamiltonian::Operator build_hamiltonian(const RunConfig& cfg);

/// Number of qubits (or grid bits) of the operator.
std::size_t n_qubits(const hamiltonian::Operator& h);

/// The ns basis strings of lowest diagonal energy, ties broken by index.
std::vector<std::string> lowest_diagonal_inputs(const hamiltonian::Operator& h, std::size_t ns);

std::unique_ptr<ansatz::StateSet> build_states(const RunConfig& cfg,
                                               const hamiltonian::Operator& h);

struct AuditRecord {
  std::size_t step = 0;
  double min_margin = 0.0;
  std::size_t violations = 0;
};

struct TrialResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> ritz;
  std::vector<double> rel_errors;  // empty without an oracle
  std::vector<double> variances;
  std::vector<double> rel_variances;
  double cond_min = 0.0;
  double cond_max = 0.0;
  optim::Termination reason = optim::Termination::max_steps;
  std::size_t steps = 0;
  std::size_t evaluations = 0;
  std::vector<optim::StepRecord> history;
  std::vector<AuditRecord> audits;
  std::vector<std::string> warnings;
  std::vector<double> params;
  double wall_ms = 0.0;
};

struct RunSummary {
  RunConfig config;
  std::optional<oracle::ExactSpectrum> exact;
  std::vector<double> analytic;  // Morse analytic levels
  std::vector<TrialResult> trials;
  std::optional<std::size_t> best;
  std::optional<oracle::LinearFit> error_fit;  // on the best trial
  bool ritz_violation = false;
  nlohmann::json hamiltonian_info;
  nlohmann::json states_info;

  /// Deterministic record: no wall-clock values.
  nlohmann::json to_json() const;
};

struct RunOptions {
  std::size_t jobs = 1;
  bool write_outputs = true;
  bool quiet = false;
};

/// Runs every trial (in parallel up to `jobs`) and writes, under
/// cfg.output_dir: summary.json, energies.csv, convergence.csv and
/// params.ckpt for the best trial, the same files per trial in trial_NNN/,
/// and timing.json with wall-clock data.
RunSummary run(const RunConfig& cfg, const RunOptions& opts = {});

struct GradcheckReport {
  std::string family;
  std::vector<std::size_t> coords;
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_deviation = 0.0;  // max |a - n| / max |a| over the sample
  double step = 1e-5;

  nlohmann::json to_json() const;
};

/// Analytic trace-loss gradient against central differences on
/// `n_sampled` coordinates drawn without replacement, at a random point
/// drawn with cfg.init_sigma and cfg.seed. Requires dim <= 2^10.
GradcheckReport gradcheck(const RunConfig& cfg, std::size_t n_sampled, double step = 1e-5);

struct BaselineTrial {
  std::uint64_t seed = 0;
  double trace_final_loss = 0.0;
  double baseline_final_loss = 0.0;
  std::vector<double> trace_energies;
  std::vector<double> baseline_energies;     // Ritz values of the baseline subspace
  std::vector<double> baseline_expectations; // sorted <psi_k|H|psi_k>
  bool trace_failed = false;
  bool baseline_failed = false;
};

struct BaselineReport {
  std::vector<double> exact;
  std::vector<BaselineTrial> trials;
  std::size_t best_trace = 0;
  std::size_t best_baseline = 0;
  std::vector<double> trace_rel_errors;     // best trace trial
  std::vector<double> baseline_rel_errors;  // best baseline trial

  nlohmann::json to_json() const;
};

/// Matched-seed trace-loss (independent circuits from |0...0>) and
/// subspace-VQE (one circuit on distinct basis inputs) training with the
/// same circuit shape and step budget.
BaselineReport compare_baseline(const RunConfig& cfg, const RunOptions& opts = {});

struct AuditReport {
  std::vector<double> ritz;
  std::vector<double> exact;
  oracle::RitzAudit audit;
  std::vector<double> variances;
  std::vector<double> rel_variances;
  double loss = 0.0;
  double loss_minus_ritz_sum = 0.0;

  nlohmann::json to_json() const;
};

/// Recomputes the oracle checks for a checkpoint. The checkpoint's state
/// metadata must match the state set that `cfg` builds.
AuditReport audit(const RunConfig& cfg, const std::filesystem::path& checkpoint_path);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tracemin::experiment
