#include "tracemin/experiment.hpp"

#include "tracemin/checkpoint.hpp"
#include "tracemin/errors.hpp"
#include "tracemin/subspace.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace tracemin::experiment {

namespace fs = std::filesystem;
using hamiltonian::GridOperator;
using hamiltonian::Operator;
using hamiltonian::PauliSum;

constexpr const char* kVersion = "0.1.0";
constexpr std::size_t kMaxQubits = 20;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::heisenberg: return "heisenberg";
    case ExperimentKind::morse: return "morse";
    case ExperimentKind::hubbard: return "hubbard";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(out)) {
    throw ConfigError(fmt::format("{}: expected a real number, got '{}'", key, v));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (is >> item) {
    std::string piece;
    std::istringstream parts(item);
    while (std::getline(parts, piece, ',')) {
      if (!piece.empty()) out.push_back(piece);
    }
  }
  return out;
}

ExperimentKind parse_experiment(const std::string& v) {
  if (v == "heisenberg") return ExperimentKind::heisenberg;
  if (v == "morse") return ExperimentKind::morse;
  if (v == "hubbard") return ExperimentKind::hubbard;
  if (v == "custom") return ExperimentKind::custom;
  throw ConfigError(fmt::format("run.experiment: unknown experiment '{}'", v));
}

const std::set<std::string>& known_families() {
  static const std::set<std::string> f{"dense_table", "open_mps",  "periodic_mps",
                                       "quantics_tt", "circuit",   "shared_circuit"};
  return f;
}

using Handler = std::function<void(const std::string& key, const std::string& value)>;
using Section = std::map<std::string, Handler>;

std::map<std::string, Section> handlers(RunConfig& c, const fs::path& base_dir) {
  auto sz = [](std::size_t& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_size(k, v); };
  };
  auto real = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_real(k, v); };
  };
  auto flag = [](bool& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_bool(k, v); };
  };

  std::map<std::string, Section> h;
  h["run"] = {
      {"experiment", [](const std::string&, const std::string&) {}},
      {"seed", [&c](const std::string& k, const std::string& v) { c.seed = parse_size(k, v); }},
      {"trials", sz(c.trials)},
      {"ns", sz(c.ns)},
      {"init_sigma", real(c.init_sigma)},
      {"output", [&c](const std::string&, const std::string& v) { c.output_dir = v; }},
      {"jitter", real(c.jitter)},
      {"kappa_abort", real(c.kappa_abort)},
      {"audit_every", sz(c.audit_every)},
      {"ritz_tol", real(c.ritz_tol)},
  };
  switch (c.experiment) {
    case ExperimentKind::heisenberg:
      h["system"] = {{"n", sz(c.n)},   {"jx", real(c.jx)}, {"jy", real(c.jy)},
                     {"jz", real(c.jz)}, {"hz", real(c.hz)}, {"periodic", flag(c.periodic)}};
      break;
    case ExperimentKind::morse:
      h["system"] = {{"nd", sz(c.nd)},          {"x_min", real(c.x_min)},
                     {"x_max", real(c.x_max)},  {"de", real(c.morse.de)},
                     {"am", real(c.morse.am)},  {"re", real(c.morse.re)},
                     {"mu", real(c.morse.mu)}};
      break;
    case ExperimentKind::hubbard:
      h["system"] = {{"lx", sz(c.lx)},
                     {"ly", sz(c.ly)},
                     {"t", real(c.t)},
                     {"u", real(c.u)},
                     {"ordering", [&c](const std::string& k, const std::string& v) {
                        if (v == "spin_major") {
                          c.ordering = hamiltonian::HubbardOrdering::spin_major;
                        } else if (v == "site_major") {
                          c.ordering = hamiltonian::HubbardOrdering::site_major;
                        } else {
                          throw ConfigError(fmt::format("{}: unknown ordering '{}'", k, v));
                        }
                      }}};
      break;
    case ExperimentKind::custom:
      h["system"] = {{"hamiltonian_file", [&c, base_dir](const std::string&, const std::string& v) {
                        fs::path p(v);
                        c.hamiltonian_file = p.is_absolute() ? p : base_dir / p;
                      }}};
      break;
  }
  h["ansatz"] = {
      {"family",
       [&c](const std::string& k, const std::string& v) {
         if (!known_families().count(v)) {
           throw ConfigError(fmt::format("{}: unknown family '{}'", k, v));
         }
         c.family = v;
       }},
      {"bond_dim", sz(c.bond_dim)},
      {"depth", sz(c.depth)},
      {"complex", flag(c.complex)},
      {"inputs", [&c](const std::string&, const std::string& v) { c.inputs = parse_list(v); }},
  };
  h["optimizer"] = {
      {"memory", sz(c.optimizer.memory)},         {"max_steps", sz(c.optimizer.max_steps)},
      {"wolfe_c1", real(c.optimizer.wolfe_c1)},   {"wolfe_c2", real(c.optimizer.wolfe_c2)},
      {"grad_tol", real(c.optimizer.grad_tol)},   {"max_linesearch", sz(c.optimizer.max_linesearch)},
  };
  h["baseline"] = {
      {"inputs",
       [&c](const std::string&, const std::string& v) { c.baseline_inputs = parse_list(v); }},
  };
  return h;
}

std::size_t config_dim_bits(const RunConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::heisenberg: return c.n;
    case ExperimentKind::morse: return c.nd;
    case ExperimentKind::hubbard: return 2 * c.lx * c.ly;
    case ExperimentKind::custom: return 0;  // known after loading
  }
  return 0;
}

void check_inputs(const std::vector<std::string>& inputs, std::size_t bits, const char* what) {
  std::set<std::string> seen;
  for (const auto& s : inputs) {
    if (s.size() != bits || s.find_first_not_of("01") != std::string::npos) {
      throw ConfigError(fmt::format("{}: '{}' is not a {}-bit basis string", what, s, bits));
    }
    if (!seen.insert(s).second) throw ConfigError(fmt::format("{}: duplicate input '{}'", what, s));
  }
}

void validate(const RunConfig& c) {
  if (c.trials == 0) throw ConfigError("run.trials must be at least 1");
  if (c.ns == 0) throw ConfigError("run.ns must be at least 1");
  if (!(c.init_sigma > 0.0)) throw ConfigError("run.init_sigma must be positive");
  if (c.jitter < 0.0) throw ConfigError("run.jitter must be non-negative");
  if (c.kappa_abort < 0.0) throw ConfigError("run.kappa_abort must be non-negative");
  if (!(c.ritz_tol >= 0.0)) throw ConfigError("run.ritz_tol must be non-negative");
  if (c.bond_dim == 0) throw ConfigError("ansatz.bond_dim must be at least 1");
  if (c.depth == 0) throw ConfigError("ansatz.depth must be at least 1");
  try {
    c.optimizer.validate();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("optimizer: {}", e.what()));
  }
  switch (c.experiment) {
    case ExperimentKind::heisenberg:
      if (c.n < 2 || c.n > kMaxQubits) {
        throw ConfigError(fmt::format("system.n must lie in [2, {}]", kMaxQubits));
      }
      break;
    case ExperimentKind::morse:
      if (c.nd < 4 || c.nd > kMaxQubits) {
        throw ConfigError(fmt::format("system.nd must lie in [4, {}]", kMaxQubits));
      }
      if (!(c.x_max > c.x_min)) throw ConfigError("system.x_max must exceed system.x_min");
      if (!(c.morse.de > 0 && c.morse.am > 0 && c.morse.mu > 0)) {
        throw ConfigError("system: Morse parameters de, am, mu must be positive");
      }
      break;
    case ExperimentKind::hubbard:
      if (c.lx * c.ly == 0 || 2 * c.lx * c.ly > kMaxQubits) {
        throw ConfigError(fmt::format("system: lattice must have 1..{} sites", kMaxQubits / 2));
      }
      break;
    case ExperimentKind::custom:
      if (c.hamiltonian_file.empty()) throw ConfigError("system.hamiltonian_file is required");
      if (!fs::exists(c.hamiltonian_file)) {
        throw ConfigError(fmt::format("system.hamiltonian_file '{}' not found",
                                      c.hamiltonian_file.string()));
      }
      break;
  }
  const std::size_t bits = config_dim_bits(c);
  if (bits > 0) {
    if (bits < 63 && c.ns > (std::size_t{1} << bits)) {
      throw ConfigError("run.ns exceeds the Hilbert space dimension");
    }
    check_inputs(c.inputs, bits, "ansatz.inputs");
    check_inputs(c.baseline_inputs, bits, "baseline.inputs");
  }
  if (!c.inputs.empty() && c.family != "shared_circuit") {
    throw ConfigError("ansatz.inputs applies only to the shared_circuit family");
  }
  if (!c.inputs.empty() && c.inputs.size() != c.ns) {
    throw ConfigError("ansatz.inputs must list exactly ns basis strings");
  }
  if (!c.baseline_inputs.empty() && c.baseline_inputs.size() != c.ns) {
    throw ConfigError("baseline.inputs must list exactly ns basis strings");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig c;
  c.text = text;
  if (auto run = tree.get_child_optional("run")) {
    if (auto e = run->get_optional<std::string>("experiment")) {
      c.experiment = parse_experiment(trim(*e));
    }
  }
  auto table = handlers(c, base_dir);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(fmt::format("config key '{}' is outside any section", section));
    }
    auto sec = table.find(section);
    if (sec == table.end()) throw ConfigError(fmt::format("unknown config section [{}]", section));
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError(fmt::format("malformed key {}.{}", section, key));
      auto h = sec->second.find(key);
      if (h == sec->second.end()) {
        throw ConfigError(fmt::format("unknown config key {}.{} for experiment {}", section, key,
                                      to_string(c.experiment)));
      }
      h->second(section + "." + key, trim(value.data()));
    }
  }
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

// --------------------------------------------------------------- builders

Operator build_hamiltonian(const RunConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::heisenberg:
      return hamiltonian::build_heisenberg(c.n, c.jx, c.jy, c.jz, c.hz, c.periodic);
    case ExperimentKind::morse:
      return hamiltonian::build_morse_grid(c.nd, c.x_min, c.x_max, c.morse);
    case ExperimentKind::hubbard:
      return hamiltonian::build_hubbard(c.lx, c.ly, c.t, c.u, c.ordering);
    case ExperimentKind::custom: {
      std::ifstream is(c.hamiltonian_file);
      if (!is) throw ConfigError("cannot read the Hamiltonian file");
      try {
        auto h = PauliSum::read_text(is);
        if (h.n_sites() > kMaxQubits) throw ConfigError("custom Hamiltonian has too many sites");
        if (c.ns > h.dim()) throw ConfigError("run.ns exceeds the Hilbert space dimension");
        return h;
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(fmt::format("Hamiltonian file: {}", e.what()));
      }
    }
  }
  throw ConfigError("unknown experiment");
}

std::size_t n_qubits(const Operator& h) {
  if (const auto* p = std::get_if<PauliSum>(&h)) return p->n_sites();
  return std::get<GridOperator>(h).n_bits;
}

namespace {

std::string bits_of(std::size_t index, std::size_t n) {
  std::string s(n, '0');
  for (std::size_t q = 0; q < n; ++q) {
    if ((index >> (n - 1 - q)) & 1U) s[q] = '1';
  }
  return s;
}

std::vector<double> diagonal(const Operator& h) {
  const std::size_t d = hamiltonian::dim(h);
  std::vector<double> out(d, 0.0);
  if (const auto* g = std::get_if<GridOperator>(&h)) {
    for (std::size_t i = 0; i < d; ++i) out[i] = g->potential[i] + 2.0 * g->kinetic_coeff;
    return out;
  }
  for (const auto& term : std::get<PauliSum>(h).terms()) {
    if (term.x_mask() != 0) continue;
    const double c = term.coeff().real();
    for (std::size_t i = 0; i < d; ++i) {
      out[i] += (std::popcount(i & term.z_mask()) & 1) ? -c : c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> lowest_diagonal_inputs(const Operator& h, std::size_t ns) {
  const auto diag = diagonal(h);
  if (ns > diag.size()) throw ConfigError("more inputs requested than basis states");
  std::vector<std::size_t> order(diag.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return diag[a] < diag[b]; });
  std::vector<std::string> out;
  for (std::size_t k = 0; k < ns; ++k) out.push_back(bits_of(order[k], n_qubits(h)));
  return out;
}

std::unique_ptr<ansatz::StateSet> build_states(const RunConfig& c, const Operator& h) {
  const std::size_t nq = n_qubits(h);
  const std::size_t d = hamiltonian::dim(h);
  std::shared_ptr<const ansatz::Family> family;
  if (c.family == "dense_table") {
    family = std::make_shared<ansatz::DenseTable>(d, c.complex);
  } else if (c.family == "open_mps") {
    family = ansatz::open_mps(nq, c.bond_dim, c.complex);
  } else if (c.family == "periodic_mps") {
    family = ansatz::periodic_mps(nq, c.bond_dim, c.complex);
  } else if (c.family == "quantics_tt") {
    family = ansatz::quantics_tt(nq, c.bond_dim, c.complex);
  } else if (c.family == "circuit") {
    family = std::make_shared<ansatz::Circuit>(nq, c.depth);
  } else if (c.family == "shared_circuit") {
    auto inputs = c.inputs.empty() ? lowest_diagonal_inputs(h, c.ns) : c.inputs;
    check_inputs(inputs, nq, "ansatz.inputs");
    return std::make_unique<ansatz::SharedCircuitStates>(
        std::make_shared<ansatz::Circuit>(nq, c.depth), std::move(inputs));
  } else {
    throw ConfigError(fmt::format("unknown family '{}'", c.family));
  }
  return std::make_unique<ansatz::IndependentStates>(std::move(family), c.ns);
}

// ------------------------------------------------------------------ output

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(fmt::format("cannot write '{}'", path.string()));
  os << content;
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::size_t num_blocks(const ansatz::StateSet& states) {
  return states.id() == "shared_circuit" ? 1 : states.ns();
}

nlohmann::json hamiltonian_json(const Operator& h, const RunConfig& c) {
  nlohmann::json j;
  j["dim"] = hamiltonian::dim(h);
  j["n_qubits"] = n_qubits(h);
  if (const auto* p = std::get_if<PauliSum>(&h)) {
    j["kind"] = "pauli_sum";
    j["n_terms"] = p->terms().size();
  } else {
    const auto& g = std::get<GridOperator>(h);
    j["kind"] = "grid";
    j["n_bits"] = g.n_bits;
    j["x_min"] = g.x_min;
    j["x_max"] = g.x_max;
    j["dx"] = g.dx();
    j["kinetic_coeff"] = g.kinetic_coeff;
    j["morse"] = {{"de", c.morse.de}, {"am", c.morse.am}, {"re", c.morse.re}, {"mu", c.morse.mu}};
  }
  return j;
}

std::string energies_csv(const TrialResult& t, const std::optional<oracle::ExactSpectrum>& exact) {
  std::string out = "k,ritz,exact,rel_error,variance,rel_variance\n";
  for (std::size_t k = 0; k < t.ritz.size(); ++k) {
    const bool have = exact && k < exact->energies.size();
    out += fmt::format("{},{},{},{},{},{}\n", k, num(t.ritz[k]),
                       have ? num(exact->energies[k]) : "", have ? num(t.rel_errors[k]) : "",
                       k < t.variances.size() ? num(t.variances[k]) : "",
                       k < t.rel_variances.size() ? num(t.rel_variances[k]) : "");
  }
  return out;
}

std::string convergence_header() { return "step,loss,shifted_loss,grad_norm,cond_S,wall_ms\n"; }

std::string convergence_row(const optim::StepRecord& r, std::optional<double> exact_sum) {
  return fmt::format("{},{},{},{},{},{:.3f}\n", r.step, num(r.loss),
                     exact_sum ? num(r.loss - *exact_sum) : "", num(r.grad_norm),
                     num(r.condition_s), r.wall_ms);
}

struct Context {
  const RunConfig& cfg;
  const Operator& h;
  const ansatz::StateSet& states;
  const std::optional<oracle::ExactSpectrum>& exact;
  bool write_outputs;
};

// Ritz values of the current subspace; empty when S is not positive definite.
std::vector<double> ritz_values(const ansatz::StateSet& states, const Operator& h,
                                std::span<const double> params) {
  const auto a = subspace::assemble(states.states(params), h);
  try {
    return linalg::gevp(a.m.h, a.m.s).energies;
  } catch (const NotPositiveDefinite&) {
    return {};
  }
}

AuditRecord audit_at(std::size_t step, const std::vector<double>& ritz,
                     const std::optional<oracle::ExactSpectrum>& exact, double tol) {
  AuditRecord rec;
  rec.step = step;
  const auto a = oracle::ritz_audit(ritz, *exact, tol);
  rec.violations = a.violations;
  rec.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& e : a.entries) rec.min_margin = std::min(rec.min_margin, e.margin);
  return rec;
}

TrialResult run_trial(const Context& ctx, std::size_t index) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const RunConfig& cfg = ctx.cfg;
  TrialResult t;
  t.index = index;
  t.seed = ansatz::subseed(cfg.seed, index);

  const fs::path dir = cfg.output_dir / fmt::format("trial_{:03}", index);
  std::ofstream conv;
  if (ctx.write_outputs) {
    fs::create_directories(dir);
    conv.open(dir / "convergence.csv", std::ios::binary);
    conv << convergence_header();
  }
  std::optional<double> exact_sum;
  if (ctx.exact) {
    exact_sum = std::accumulate(ctx.exact->energies.begin(), ctx.exact->energies.end(), 0.0);
  }

  subspace::TraceObjective objective(ctx.states, ctx.h, linalg::Regularization{cfg.jitter});
  const auto fn = [&](std::span<const double> p) { return objective(p); };
  const std::vector<double> x0 = ctx.states.init(cfg.init_sigma, t.seed);

  bool kappa_exceeded = false;
  const auto on_step = [&](const optim::StepRecord& r, std::span<const double> x) {
    if (conv.is_open()) {
      conv << convergence_row(r, exact_sum);
      conv.flush();
    }
    if (ctx.exact && (r.step == 0 || (cfg.audit_every > 0 && r.step % cfg.audit_every == 0))) {
      const auto ritz = ritz_values(ctx.states, ctx.h, x);
      if (!ritz.empty()) t.audits.push_back(audit_at(r.step, ritz, ctx.exact, cfg.ritz_tol));
    }
    if (cfg.kappa_abort > 0.0 && r.condition_s > cfg.kappa_abort) {
      kappa_exceeded = true;
      return false;
    }
    return true;
  };

  try {
    const auto trace = optim::minimize(fn, x0, cfg.optimizer, on_step);
    t.history = trace.steps;
    t.initial_loss = trace.steps.front().loss;
    t.final_loss = trace.loss;
    t.reason = trace.reason;
    t.steps = trace.steps.back().step;
    t.evaluations = trace.evaluations;
    t.params = trace.x;
    if (kappa_exceeded) {
      t.warnings.push_back(fmt::format("condition number of S exceeded {:g} at step {}",
                                       cfg.kappa_abort, t.steps));
    }
    t.cond_min = std::numeric_limits<double>::infinity();
    t.cond_max = 0.0;
    for (const auto& r : t.history) {
      t.cond_min = std::min(t.cond_min, r.condition_s);
      t.cond_max = std::max(t.cond_max, r.condition_s);
    }

    const auto psi = ctx.states.states(t.params);
    const auto a = subspace::assemble(psi, ctx.h);
    const auto eig = subspace::ritz_postprocess(a.m, psi);
    t.ritz = eig.energies;
    for (const auto& s : eig.states) {
      const auto v = oracle::energy_variance(ctx.h, s);
      t.variances.push_back(v.variance);
      t.rel_variances.push_back(v.relative);
    }
    if (ctx.exact) {
      for (std::size_t k = 0; k < t.ritz.size(); ++k) {
        const double e = ctx.exact->energies[k];
        t.rel_errors.push_back(std::abs(t.ritz[k] - e) / std::abs(e));
      }
      if (t.audits.empty() || t.audits.back().step != t.steps) {
        t.audits.push_back(audit_at(t.steps, t.ritz, ctx.exact, cfg.ritz_tol));
      }
    }
  } catch (const NonFiniteLoss& e) {
    t.failed = true;
    t.error = fmt::format("trial {} step {}: {}", index, e.step(), e.what());
  } catch (const Error& e) {
    t.failed = true;
    t.error = fmt::format("trial {}: {}", index, e.what());
  }
  for (const auto& w : objective.log().warnings) t.warnings.push_back(w);
  t.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  if (ctx.write_outputs && !t.failed) {
    write_file(dir / "energies.csv", energies_csv(t, ctx.exact));
    auto ck = checkpoint::make(ctx.states.metadata(), t.seed, ctx.states.ns(), t.params,
                               num_blocks(ctx.states));
    ck.config_text = cfg.text;
    checkpoint::save(dir / "params.ckpt", ck);
  }
  return t;
}

nlohmann::json vec(const std::vector<double>& v) { return nlohmann::json(v); }

nlohmann::json trial_json(const TrialResult& t) {
  nlohmann::json j;
  j["index"] = t.index;
  j["seed"] = t.seed;
  j["failed"] = t.failed;
  if (t.failed) {
    j["error"] = t.error;
    return j;
  }
  j["initial_loss"] = t.initial_loss;
  j["final_loss"] = t.final_loss;
  j["ritz"] = vec(t.ritz);
  if (!t.rel_errors.empty()) j["rel_errors"] = vec(t.rel_errors);
  j["variances"] = vec(t.variances);
  j["rel_variances"] = vec(t.rel_variances);
  j["cond_s_min"] = t.cond_min;
  j["cond_s_max"] = t.cond_max;
  j["termination"] = optim::to_string(t.reason);
  j["steps"] = t.steps;
  j["evaluations"] = t.evaluations;
  auto audits = nlohmann::json::array();
  for (const auto& a : t.audits) {
    audits.push_back({{"step", a.step}, {"min_margin", a.min_margin}, {"violations", a.violations}});
  }
  j["ritz_audits"] = audits;
  j["warnings"] = t.warnings;
  return j;
}

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::optional<oracle::ExactSpectrum> exact_for(const Operator& h, std::size_t k) {
  if (hamiltonian::dim(h) > oracle::kMaxDenseDim) return std::nullopt;
  return oracle::exact_spectrum(h, k);
}

}  // namespace

nlohmann::json RunSummary::to_json() const {
  nlohmann::json j;
  j["software"] = {{"name", "tracemin"}, {"version", kVersion}};
  j["constants"] = {{"hbar2_over_2amu_cm1_A2", hamiltonian::hbar2_over_2amu()},
                    {"source", "CODATA 2018"}};
  j["config"] = config.text;
  j["effective"] = {{"seed", config.seed},
                    {"trials", config.trials},
                    {"experiment", to_string(config.experiment)},
                    {"family", config.family},
                    {"ns", config.ns}};
  j["hamiltonian"] = hamiltonian_info;
  j["states"] = states_info;
  if (exact) {
    j["exact"] = {{"energies", exact->energies},
                  {"source", oracle::to_string(exact->source)},
                  {"dim", exact->dim}};
  } else {
    j["exact"] = nullptr;
  }
  if (!analytic.empty()) j["morse_analytic"] = analytic;
  auto ts = nlohmann::json::array();
  for (const auto& t : trials) ts.push_back(trial_json(t));
  j["trials"] = ts;
  j["best_trial"] = best ? nlohmann::json(*best) : nlohmann::json(nullptr);
  if (error_fit) {
    j["error_fit"] = {
        {"slope", error_fit->slope}, {"intercept", error_fit->intercept}, {"r2", error_fit->r2}};
  }
  j["ritz_violation"] = ritz_violation;
  return j;
}

RunSummary run(const RunConfig& cfg, const RunOptions& opts) {
  RunSummary s;
  s.config = cfg;
  const Operator h = build_hamiltonian(cfg);
  const auto states = build_states(cfg, h);
  s.hamiltonian_info = hamiltonian_json(h, cfg);
  s.states_info = states->metadata();
  s.states_info["param_count"] = states->param_count();
  s.exact = exact_for(h, cfg.ns);
  if (cfg.experiment == ExperimentKind::morse) {
    const std::size_t top = oracle::morse_max_level(cfg.morse.de, cfg.morse.am, cfg.morse.mu);
    for (std::size_t n = 0; n < cfg.ns && n <= top; ++n) {
      s.analytic.push_back(oracle::morse_analytic(n, cfg.morse.de, cfg.morse.am, cfg.morse.mu));
    }
  }

  if (opts.write_outputs) fs::create_directories(cfg.output_dir);
  const Context ctx{cfg, h, *states, s.exact, opts.write_outputs};
  s.trials.resize(cfg.trials);
  parallel_for(cfg.trials, opts.jobs, [&](std::size_t i) {
    s.trials[i] = run_trial(ctx, i);
    if (!opts.quiet) {
      const auto& t = s.trials[i];
      if (t.failed) {
        fmt::print(stderr, "trial {}: failed: {}\n", i, t.error);
      } else {
        fmt::print(stderr, "trial {}: loss {:.12g} after {} steps ({})\n", i, t.final_loss,
                   t.steps, optim::to_string(t.reason));
      }
    }
  });

  for (const auto& t : s.trials) {
    if (t.failed) continue;
    for (const auto& a : t.audits) s.ritz_violation = s.ritz_violation || a.violations > 0;
    if (!s.best || t.final_loss < s.trials[*s.best].final_loss) s.best = t.index;
  }
  if (s.best && s.exact && cfg.ns >= 3) {
    s.error_fit = oracle::error_scaling_fit(s.trials[*s.best].rel_errors);
  }

  if (opts.write_outputs) {
    write_file(cfg.output_dir / "summary.json", s.to_json().dump(2) + "\n");
    nlohmann::json timing;
    for (const auto& t : s.trials) {
      timing["trials"].push_back({{"index", t.index}, {"wall_ms", t.wall_ms}});
    }
    write_file(cfg.output_dir / "timing.json", timing.dump(2) + "\n");
    if (s.best) {
      const auto& b = s.trials[*s.best];
      const fs::path dir = cfg.output_dir / fmt::format("trial_{:03}", b.index);
      for (const char* f : {"energies.csv", "convergence.csv", "params.ckpt"}) {
        fs::copy_file(dir / f, cfg.output_dir / f, fs::copy_options::overwrite_existing);
      }
    }
  }
  return s;
}

// --------------------------------------------------------------- gradcheck

nlohmann::json GradcheckReport::to_json() const {
  return {{"family", family},         {"step", step},
          {"coords", coords},         {"analytic", analytic},
          {"numeric", numeric},       {"max_rel_deviation", max_rel_deviation}};
}

GradcheckReport gradcheck(const RunConfig& cfg, std::size_t n_sampled, double step) {
  const Operator h = build_hamiltonian(cfg);
  if (hamiltonian::dim(h) > (std::size_t{1} << 10)) {
    throw ConfigError("gradcheck needs a system of dimension at most 2^10");
  }
  if (n_sampled == 0) throw ConfigError("gradcheck needs at least one coordinate");
  const auto states = build_states(cfg, h);
  subspace::TraceObjective objective(*states, h, linalg::Regularization{cfg.jitter});
  const auto x = states->init(cfg.init_sigma, cfg.seed);

  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(ansatz::subseed(cfg.seed, 0x67726164ULL));
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(n_sampled, all.size()));
  std::sort(all.begin(), all.end());

  const auto e = objective(x);
  if (!std::isfinite(e.loss)) throw Error("gradcheck: the overlap matrix is singular at the sample point");
  const auto fd = optim::fd_gradient([&](std::span<const double> p) { return objective.value(p); },
                                     x, step, all);
  GradcheckReport r;
  r.family = states->id();
  r.step = step;
  r.coords = all;
  double scale = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    r.analytic.push_back(e.gradient[all[i]]);
    r.numeric.push_back(fd[i]);
    scale = std::max(scale, std::abs(e.gradient[all[i]]));
  }
  if (scale == 0.0) scale = 1.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    r.max_rel_deviation = std::max(r.max_rel_deviation, std::abs(r.analytic[i] - r.numeric[i]) / scale);
  }
  return r;
}

// ---------------------------------------------------------------- baseline

nlohmann::json BaselineReport::to_json() const {
  nlohmann::json j;
  j["exact"] = exact;
  auto ts = nlohmann::json::array();
  for (const auto& t : trials) {
    ts.push_back({{"seed", t.seed},
                  {"trace_final_loss", t.trace_failed ? nlohmann::json(nullptr)
                                                      : nlohmann::json(t.trace_final_loss)},
                  {"baseline_final_loss", t.baseline_failed
                                              ? nlohmann::json(nullptr)
                                              : nlohmann::json(t.baseline_final_loss)},
                  {"trace_energies", t.trace_energies},
                  {"baseline_energies", t.baseline_energies},
                  {"baseline_expectations", t.baseline_expectations}});
  }
  j["trials"] = ts;
  j["best_trace"] = best_trace;
  j["best_baseline"] = best_baseline;
  j["trace_rel_errors"] = trace_rel_errors;
  j["baseline_rel_errors"] = baseline_rel_errors;
  return j;
}

BaselineReport compare_baseline(const RunConfig& cfg, const RunOptions& opts) {
  if (cfg.experiment != ExperimentKind::hubbard && cfg.experiment != ExperimentKind::heisenberg) {
    throw ConfigError("compare-baseline needs a hubbard or heisenberg experiment");
  }
  if (cfg.family != "circuit" && cfg.family != "shared_circuit") {
    throw ConfigError("compare-baseline needs a circuit family");
  }
  const Operator h = build_hamiltonian(cfg);
  const std::size_t nq = n_qubits(h);
  const ansatz::IndependentStates trace_states(std::make_shared<ansatz::Circuit>(nq, cfg.depth),
                                               cfg.ns);
  auto inputs = cfg.baseline_inputs.empty() ? lowest_diagonal_inputs(h, cfg.ns) : cfg.baseline_inputs;
  const ansatz::SharedCircuitStates vqe_states(std::make_shared<ansatz::Circuit>(nq, cfg.depth),
                                               inputs);
  BaselineReport report;
  const auto exact = exact_for(h, cfg.ns);
  if (exact) report.exact = exact->energies;

  if (opts.write_outputs) fs::create_directories(cfg.output_dir);
  report.trials.resize(cfg.trials);

  auto train = [&](const auto& objective, const ansatz::StateSet& states, std::uint64_t seed,
                   const fs::path& csv, double& final_loss, std::vector<double>& params) {
    std::ofstream conv;
    if (opts.write_outputs) {
      fs::create_directories(csv.parent_path());
      conv.open(csv, std::ios::binary);
      conv << convergence_header();
    }
    std::optional<double> exact_sum;
    if (exact) exact_sum = std::accumulate(exact->energies.begin(), exact->energies.end(), 0.0);
    const auto fn = [&](std::span<const double> p) { return objective(p); };
    const auto tr = optim::minimize(fn, states.init(cfg.init_sigma, seed), cfg.optimizer,
                                    [&](const optim::StepRecord& r, std::span<const double>) {
                                      if (conv.is_open()) conv << convergence_row(r, exact_sum);
                                      return true;
                                    });
    final_loss = tr.loss;
    params = tr.x;
  };

  parallel_for(cfg.trials, opts.jobs, [&](std::size_t i) {
    BaselineTrial& t = report.trials[i];
    t.seed = ansatz::subseed(cfg.seed, i);
    try {
      std::vector<double> p;
      const subspace::TraceObjective obj(trace_states, h, linalg::Regularization{cfg.jitter});
      train(obj, trace_states, t.seed, cfg.output_dir / "trace" / fmt::format("trial_{:03}", i) / "convergence.csv",
            t.trace_final_loss, p);
      const auto psi = trace_states.states(p);
      t.trace_energies = subspace::ritz_postprocess(subspace::assemble(psi, h).m, psi).energies;
    } catch (const Error&) {
      t.trace_failed = true;
    }
    try {
      std::vector<double> p;
      const subspace::VqeObjective obj(vqe_states, h);
      train(obj, vqe_states, t.seed,
            cfg.output_dir / "baseline" / fmt::format("trial_{:03}", i) / "convergence.csv",
            t.baseline_final_loss, p);
      const auto psi = vqe_states.states(p);
      t.baseline_energies = subspace::ritz_postprocess(subspace::assemble(psi, h).m, psi).energies;
      for (const auto& s : psi) {
        t.baseline_expectations.push_back(hamiltonian::matrix_element(h, s, s).real());
      }
      std::sort(t.baseline_expectations.begin(), t.baseline_expectations.end());
    } catch (const Error&) {
      t.baseline_failed = true;
    }
  });

  auto best_of = [&](auto failed, auto loss) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      if (failed(report.trials[i])) continue;
      if (!best || loss(report.trials[i]) < loss(report.trials[*best])) best = i;
    }
    if (!best) throw Error("compare-baseline: every trial failed");
    return *best;
  };
  report.best_trace = best_of([](const BaselineTrial& t) { return t.trace_failed; },
                              [](const BaselineTrial& t) { return t.trace_final_loss; });
  report.best_baseline = best_of([](const BaselineTrial& t) { return t.baseline_failed; },
                                 [](const BaselineTrial& t) { return t.baseline_final_loss; });
  auto rel = [&](const std::vector<double>& e) {
    std::vector<double> out;
    for (std::size_t k = 0; k < e.size() && k < report.exact.size(); ++k) {
      out.push_back(std::abs(e[k] - report.exact[k]) / std::abs(report.exact[k]));
    }
    return out;
  };
  report.trace_rel_errors = rel(report.trials[report.best_trace].trace_energies);
  report.baseline_rel_errors = rel(report.trials[report.best_baseline].baseline_energies);

  if (opts.write_outputs) {
    write_file(cfg.output_dir / "report.json", report.to_json().dump(2) + "\n");
    std::string tab = "k,exact,trace_energy,trace_rel_error,baseline_energy,baseline_rel_error\n";
    const auto& te = report.trials[report.best_trace].trace_energies;
    const auto& be = report.trials[report.best_baseline].baseline_energies;
    for (std::size_t k = 0; k < report.trace_rel_errors.size(); ++k) {
      tab += fmt::format("{},{},{},{},{},{}\n", k, num(report.exact[k]), num(te[k]),
                         num(report.trace_rel_errors[k]), num(be[k]),
                         num(report.baseline_rel_errors[k]));
    }
    write_file(cfg.output_dir / "errors.csv", tab);
  }
  return report;
}

// ------------------------------------------------------------------- audit

nlohmann::json AuditReport::to_json() const {
  nlohmann::json j;
  j["ritz"] = ritz;
  j["exact"] = exact;
  auto entries = nlohmann::json::array();
  for (const auto& e : audit.entries) {
    entries.push_back({{"index", e.index}, {"margin", e.margin}, {"violation", e.violation}});
  }
  j["margins"] = entries;
  j["violations"] = audit.violations;
  j["variances"] = variances;
  j["rel_variances"] = rel_variances;
  j["loss"] = loss;
  j["loss_minus_ritz_sum"] = loss_minus_ritz_sum;
  return j;
}

AuditReport audit(const RunConfig& cfg, const fs::path& checkpoint_path) {
  const auto ck = checkpoint::load(checkpoint_path);
  const Operator h = build_hamiltonian(cfg);
  const auto states = build_states(cfg, h);
  if (ck.metadata != states->metadata() || ck.ns != states->ns()) {
    throw ConfigError("checkpoint metadata does not match the configured state set");
  }
  const auto params = ck.pooled();
  if (params.size() != states->param_count()) {
    throw ConfigError("checkpoint parameter count does not match the configured state set");
  }
  const auto exact = exact_for(h, cfg.ns);
  if (!exact) throw TooLarge("audit needs a system within the dense diagonalization limit");

  AuditReport r;
  const auto psi = states->states(params);
  const auto a = subspace::assemble(psi, h);
  const auto eig = subspace::ritz_postprocess(a.m, psi);
  r.ritz = eig.energies;
  r.exact = exact->energies;
  r.audit = oracle::ritz_audit(r.ritz, *exact, cfg.ritz_tol);
  for (const auto& s : eig.states) {
    const auto v = oracle::energy_variance(h, s);
    r.variances.push_back(v.variance);
    r.rel_variances.push_back(v.relative);
  }
  r.loss = subspace::loss(a.m);
  r.loss_minus_ritz_sum = r.loss - std::accumulate(r.ritz.begin(), r.ritz.end(), 0.0);
  return r;
}

}  // namespace tracemin::experiment
