#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tracemin::optim {

/// Loss value and gradient at one parameter point. A non-finite loss marks
/// an infeasible point (the gradient may then be empty).
struct Evaluation {
  double loss = 0.0;
  std::vector<double> gradient;
  double condition_s = 1.0;
};

struct OptimizerConfig {
  std::size_t memory = 10;
  std::size_t max_steps = 1000;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double grad_tol = 1e-9;
  std::size_t max_linesearch = 40;

  /// Throws ConfigError unless 0 < c1 < c2 < 1 and memory >= 1.
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double condition_s = 1.0;
  double step_length = 0.0;
  double wall_ms = 0.0;
  std::size_t evaluations = 0;
  bool armijo = true;     // sufficient decrease held for this step
  bool curvature = true;  // strong curvature condition held for this step
};

enum class Termination { grad_tol, max_steps, line_search_failed, aborted };

std::string to_string(Termination t);

struct OptTrace {
  std::vector<StepRecord> steps;  // steps[0] is the starting point
  std::vector<double> x;
  double loss = 0.0;
  std::vector<double> gradient;
  Termination reason = Termination::max_steps;
  std::size_t evaluations = 0;
};

using Objective = std::function<Evaluation(std::span<const double>)>;

/// Called after every accepted step (and for the starting point); returning
/// false stops the run with Termination::aborted.
using StepCallback = std::function<bool(const StepRecord&, std::span<const double>)>;

/// L-BFGS (two-loop recursion) with a strong-Wolfe line search using cubic
/// interpolation and bracketing. Throws NonFiniteLoss if the starting point
/// is not finite.
OptTrace minimize(const Objective& objective, std::vector<double> x0,
                  const OptimizerConfig& cfg, const StepCallback& on_step = {});

/// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every k.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step);

/// Central differences on a subset of coordinates.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step,
                                std::span<const std::size_t> coords);

}  // namespace tracemin::optim
