// tracemin: command-line front end for the trace-loss excited-state solver.

#include "tracemin/errors.hpp"
#include "tracemin/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <optional>

namespace {

namespace fs = std::filesystem;
namespace ex = tracemin::experiment;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;
constexpr int kRitzViolation = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::size_t jobs = 1;
  std::string output;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "run configuration (INI)")->required();
  app->add_option("--seed", c.seed, "override run.seed");
  app->add_option("--trials", c.trials, "override run.trials");
  app->add_option("--jobs", c.jobs, "trials run in parallel")->check(CLI::PositiveNumber);
  app->add_option("--output", c.output, "override run.output");
}

ex::RunConfig load(const Common& c) {
  auto cfg = ex::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) {
    if (*c.trials == 0) throw tracemin::ConfigError("--trials must be at least 1");
    cfg.trials = *c.trials;
  }
  if (!c.output.empty()) cfg.output_dir = c.output;
  return cfg;
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  const auto s = ex::run(cfg, {.jobs = c.jobs});
  if (!s.best) {
    fmt::print(stderr, "every trial failed\n");
    return kNumericalFailure;
  }
  const auto& b = s.trials[*s.best];
  fmt::print("best trial {} final loss {:.15g}\n", b.index, b.final_loss);
  for (std::size_t k = 0; k < b.ritz.size(); ++k) {
    if (s.exact) {
      fmt::print("  E[{}] = {:.15g}  exact {:.15g}  rel {:.3e}\n", k, b.ritz[k],
                 s.exact->energies[k], b.rel_errors[k]);
    } else {
      fmt::print("  E[{}] = {:.15g}\n", k, b.ritz[k]);
    }
  }
  if (s.ritz_violation) {
    fmt::print(stderr, "Ritz upper bound violated\n");
    return kRitzViolation;
  }
  return kOk;
}

int cmd_gradcheck(const Common& c, std::size_t samples, double step, double tol) {
  const auto cfg = load(c);
  const auto r = ex::gradcheck(cfg, samples, step);
  ex::write_file(cfg.output_dir / "gradcheck.json", r.to_json().dump(2) + "\n");
  fmt::print("{}: {} coordinates, max relative deviation {:.3e}\n", r.family, r.coords.size(),
             r.max_rel_deviation);
  return r.max_rel_deviation < tol ? kOk : kNumericalFailure;
}

int cmd_baseline(const Common& c) {
  const auto cfg = load(c);
  const auto r = ex::compare_baseline(cfg, {.jobs = c.jobs});
  const auto& tr = r.trials[r.best_trace];
  const auto& bl = r.trials[r.best_baseline];
  fmt::print("best trace-loss final loss {:.12g}, best subspace-VQE final loss {:.12g}\n",
             tr.trace_final_loss, bl.baseline_final_loss);
  for (std::size_t k = 0; k < r.trace_rel_errors.size(); ++k) {
    fmt::print("  k={}  trace rel {:.3e}  baseline rel {:.3e}\n", k, r.trace_rel_errors[k],
               r.baseline_rel_errors[k]);
  }
  return kOk;
}

int cmd_audit(const Common& c, const std::string& ckpt) {
  const auto cfg = load(c);
  const auto r = ex::audit(cfg, ckpt);
  ex::write_file(cfg.output_dir / "audit.json", r.to_json().dump(2) + "\n");
  for (const auto& e : r.audit.entries) {
    fmt::print("  k={}  ritz {:.15g}  exact {:.15g}  margin {:.3e}{}\n", e.index, e.ritz, e.exact,
               e.margin, e.violation ? "  VIOLATION" : "");
  }
  return r.audit.clean() ? kOk : kRitzViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-loss variational solver for low-lying eigenstates"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "train and write run outputs");
  add_common(run, run_opts);

  Common gc_opts;
  std::size_t samples = 64;
  double step = 1e-5;
  double tol = 1e-6;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_common(gc, gc_opts);
  gc->add_option("--samples", samples, "coordinates sampled")->check(CLI::PositiveNumber);
  gc->add_option("--step", step, "central-difference step");
  gc->add_option("--tol", tol, "maximum accepted relative deviation");

  Common cb_opts;
  auto* cb = app.add_subcommand("compare-baseline", "trace loss against subspace VQE");
  add_common(cb, cb_opts);

  Common au_opts;
  std::string ckpt;
  auto* au = app.add_subcommand("audit", "recompute oracle checks from a checkpoint");
  add_common(au, au_opts);
  au->add_option("--checkpoint", ckpt, "params.ckpt to audit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*gc) return cmd_gradcheck(gc_opts, samples, step, tol);
    if (*cb) return cmd_baseline(cb_opts);
    if (*au) return cmd_audit(au_opts, ckpt);
  } catch (const tracemin::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kNumericalFailure;
  }
  return kOk;
}
