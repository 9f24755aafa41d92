#include "tracemin/optim.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace tracemin::optim {

void OptimizerConfig::validate() const {
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw ConfigError(fmt::format("Wolfe constants must satisfy 0 < c1 < c2 < 1 (got {}, {})",
                                  wolfe_c1, wolfe_c2));
  }
  if (memory < 1) throw ConfigError("L-BFGS memory must be at least 1");
  if (max_linesearch < 1) throw ConfigError("max_linesearch must be at least 1");
  if (!(grad_tol >= 0.0)) throw ConfigError("grad_tol must be nonnegative");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::grad_tol: return "grad_tol";
    case Termination::max_steps: return "max_steps";
    case Termination::line_search_failed: return "line_search_failed";
    case Termination::aborted: return "aborted";
  }
  return "unknown";
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

bool finite(const Evaluation& e, std::size_t n) {
  if (!std::isfinite(e.loss) || e.gradient.size() != n) return false;
  return std::all_of(e.gradient.begin(), e.gradient.end(),
                     [](double v) { return std::isfinite(v); });
}

// Minimizer of the cubic interpolating (x1, f1, g1) and (x2, f2, g2),
// clamped to [lo, hi]; midpoint when the cubic has no real minimizer.
double cubic_minimizer(double x1, double f1, double g1, double x2, double f2, double g2, double lo,
                       double hi) {
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double disc = d1 * d1 - g1 * g2;
  if (disc >= 0.0) {
    const double d2 = std::sqrt(disc);
    const double t = x1 <= x2 ? x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
                              : x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
    if (std::isfinite(t)) return std::clamp(t, lo, hi);
  }
  return 0.5 * (lo + hi);
}

struct Trial {
  double alpha = 0.0;
  Evaluation eval;
  double slope = 0.0;  // directional derivative
};

struct LineSearchResult {
  bool success = false;
  Trial accepted;
  Trial best;  // lowest finite loss seen
  std::size_t evaluations = 0;
};

class StrongWolfe {
 public:
  StrongWolfe(const Objective& f, const Vec& x, const Vec& d, double f0, double slope0,
              const OptimizerConfig& cfg)
      : f_(f), x_(x), d_(d), f0_(f0), slope0_(slope0), cfg_(cfg) {
    best_.alpha = 0.0;
    best_.eval.loss = f0;
  }

  LineSearchResult run(double alpha) {
    Trial prev;
    prev.alpha = 0.0;
    prev.eval.loss = f0_;
    prev.slope = slope0_;
    for (std::size_t i = 0; evaluations_ < cfg_.max_linesearch; ++i) {
      Trial cur = evaluate(alpha);
      if (!cur.eval.gradient.size()) {
        // Infeasible trial point: back off toward the last good point.
        alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
        continue;
      }
      if (cur.eval.loss > f0_ + cfg_.wolfe_c1 * alpha * slope0_ ||
          (i > 0 && cur.eval.loss >= prev.eval.loss)) {
        return zoom(prev, cur);
      }
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) return done(cur);
      if (cur.slope >= 0.0) return zoom(cur, prev);
      const double lo = alpha + 0.01 * (alpha - prev.alpha);
      const double hi = alpha * 10.0;
      const double next = cubic_minimizer(prev.alpha, prev.eval.loss, prev.slope, alpha,
                                          cur.eval.loss, cur.slope, lo, hi);
      prev = std::move(cur);
      alpha = next;
    }
    return fail();
  }

 private:
  Trial evaluate(double alpha) {
    ++evaluations_;
    Vec xt(x_.size());
    for (std::size_t k = 0; k < xt.size(); ++k) xt[k] = x_[k] + alpha * d_[k];
    Trial t;
    t.alpha = alpha;
    t.eval = f_(xt);
    if (!finite(t.eval, x_.size())) {
      t.eval.gradient.clear();
      return t;
    }
    t.slope = dot(t.eval.gradient, d_);
    if (t.eval.loss < best_.eval.loss) best_ = t;
    return t;
  }

  // lo satisfies sufficient decrease and has the lower loss of the bracket.
  LineSearchResult zoom(Trial lo, Trial hi) {
    bool insufficient_progress = false;
    while (evaluations_ < cfg_.max_linesearch) {
      const double a = std::min(lo.alpha, hi.alpha);
      const double b = std::max(lo.alpha, hi.alpha);
      if ((b - a) * std::max(1.0, norm(d_)) < 1e-14 * std::max(1.0, b)) break;
      double alpha;
      if (hi.eval.gradient.empty()) {
        alpha = 0.5 * (a + b);
      } else {
        alpha = cubic_minimizer(lo.alpha, lo.eval.loss, lo.slope, hi.alpha, hi.eval.loss, hi.slope,
                                a, b);
      }
      // Keep trial points away from the bracket ends.
      const double eps = 0.1 * (b - a);
      if (std::min(b - alpha, alpha - a) < eps) {
        if (insufficient_progress || alpha >= b || alpha <= a) {
          alpha = std::abs(alpha - b) < std::abs(alpha - a) ? b - eps : a + eps;
          insufficient_progress = false;
        } else {
          insufficient_progress = true;
        }
      } else {
        insufficient_progress = false;
      }
      Trial cur = evaluate(alpha);
      if (cur.eval.gradient.empty()) {
        hi = std::move(cur);
        continue;
      }
      if (cur.eval.loss > f0_ + cfg_.wolfe_c1 * alpha * slope0_ || cur.eval.loss >= lo.eval.loss) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) return done(cur);
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return fail();
  }

  LineSearchResult done(Trial t) {
    LineSearchResult r;
    r.success = true;
    r.accepted = std::move(t);
    r.best = best_;
    r.evaluations = evaluations_;
    return r;
  }

  LineSearchResult fail() {
    LineSearchResult r;
    r.success = false;
    r.best = best_;
    r.evaluations = evaluations_;
    return r;
  }

  const Objective& f_;
  const Vec& x_;
  const Vec& d_;
  double f0_;
  double slope0_;
  const OptimizerConfig& cfg_;
  Trial best_;
  std::size_t evaluations_ = 0;
};

}  // namespace

OptTrace minimize(const Objective& objective, std::vector<double> x0, const OptimizerConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  const std::size_t n = x0.size();
  if (!std::all_of(x0.begin(), x0.end(), [](double v) { return std::isfinite(v); })) {
    throw NonFiniteLoss(0, "starting parameters are not finite");
  }
  OptTrace trace;
  trace.x = std::move(x0);
  Evaluation cur = objective(trace.x);
  trace.evaluations = 1;
  if (!finite(cur, n)) throw NonFiniteLoss(0, fmt::format("initial loss {}", cur.loss));

  std::deque<Vec> s_hist;
  std::deque<Vec> y_hist;
  std::deque<double> rho_hist;

  auto record = [&](std::size_t step, double alpha, std::size_t evals, bool armijo, bool curv) {
    StepRecord r;
    r.step = step;
    r.loss = cur.loss;
    r.grad_norm = norm(cur.gradient);
    r.condition_s = cur.condition_s;
    r.step_length = alpha;
    r.wall_ms = elapsed_ms();
    r.evaluations = evals;
    r.armijo = armijo;
    r.curvature = curv;
    trace.steps.push_back(r);
    return on_step ? on_step(r, trace.x) : true;
  };

  auto finish = [&](Termination reason) {
    trace.loss = cur.loss;
    trace.gradient = cur.gradient;
    trace.reason = reason;
    return trace;
  };

  if (!record(0, 0.0, 1, true, true)) return finish(Termination::aborted);

  for (std::size_t step = 1;; ++step) {
    if (norm(cur.gradient) <= cfg.grad_tol) return finish(Termination::grad_tol);
    if (step > cfg.max_steps) return finish(Termination::max_steps);

    // Two-loop recursion.
    Vec d = cur.gradient;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha_hist(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha_hist[i] = rho_hist[i] * dot(s_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] -= alpha_hist[i] * y_hist[i][k];
    }
    double gamma = 1.0;
    if (m > 0) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (auto& v : d) v *= gamma;
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] += s_hist[i][k] * (alpha_hist[i] - beta);
    }
    for (auto& v : d) v = -v;

    double slope = dot(cur.gradient, d);
    if (!(slope < 0.0)) {
      // Not a descent direction: drop the curvature history.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = cur.gradient;
      for (auto& v : d) v = -v;
      slope = dot(cur.gradient, d);
    }
    // Unit step, except the first steepest-descent step is scaled to unit length.
    const double alpha0 = m == 0 ? std::min(1.0, 1.0 / norm(cur.gradient)) : 1.0;

    StrongWolfe ls(objective, trace.x, d, cur.loss, slope, cfg);
    LineSearchResult res = ls.run(alpha0);
    trace.evaluations += res.evaluations;
    if (!res.success) {
      if (res.best.alpha > 0.0 && !res.best.eval.gradient.empty()) {
        for (std::size_t k = 0; k < n; ++k) trace.x[k] += res.best.alpha * d[k];
        cur = std::move(res.best.eval);
      }
      return finish(Termination::line_search_failed);
    }

    const Trial& acc = res.accepted;
    Vec s(n);
    Vec y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = acc.alpha * d[k];
      y[k] = acc.eval.gradient[k] - cur.gradient[k];
      trace.x[k] += s[k];
    }
    const bool armijo = acc.eval.loss <= cur.loss + cfg.wolfe_c1 * acc.alpha * slope;
    const bool curvature = std::abs(acc.slope) <= -cfg.wolfe_c2 * slope;
    cur = acc.eval;

    const double sy = dot(s, y);
    if (sy > 1e-300) {
      if (s_hist.size() == cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    if (!record(step, acc.alpha, res.evaluations, armijo, curvature)) {
      return finish(Termination::aborted);
    }
  }
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step) {
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fd_gradient(f, x, step, all);
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step,
                                std::span<const std::size_t> coords) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<double> xt(x.begin(), x.end());
  std::vector<double> g;
  g.reserve(coords.size());
  for (std::size_t k : coords) {
    if (k >= xt.size()) throw ShapeMismatch("finite-difference coordinate out of range");
    const double orig = xt[k];
    xt[k] = orig + step;
    const double fp = f(xt);
    xt[k] = orig - step;
    const double fm = f(xt);
    xt[k] = orig;
    g.push_back((fp - fm) / (2.0 * step));
  }
  return g;
}

}  // namespace tracemin::optim
