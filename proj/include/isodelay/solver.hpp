#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "isodelay/conditions.hpp"

namespace isodelay {

struct ObjectiveValue {
  double value = 0.0;
  /// d value / d q at the free nodes shift+1 .. last-1, node-major.
  std::vector<double> gradient;
};

/// Trapezoidal integral of F = L - lambda.g and its exact gradient with
/// respect to the free node values. History nodes and the terminal node are
/// fixed.
ObjectiveValue discretized_objective(const DelayedProblem& problem, const MultiplierVector& lambda,
                                     const Trajectory& traj);

enum class MultiplierUpdate { first_order, secant };

struct SolveSettings {
  int intervals = 60;  ///< N, so h = (t2 - t1) / N
  double inner_tolerance = 1e-10;
  double outer_tolerance = 1e-10;
  int max_inner = 20000;
  int max_outer = 60;
  double penalty = 10.0;
  double penalty_growth = 10.0;
  double penalty_cap = 1e6;
  std::vector<double> initial_lambda;  ///< zeros when empty
  MultiplierUpdate update = MultiplierUpdate::first_order;
  /// Warm start; must live on the solve grid. Linear interpolant otherwise.
  std::optional<Trajectory> initial;
  int lbfgs_memory = 10;
  /// Tolerance for the verdicts of the attached reports; 10 h^2 when unset.
  std::optional<double> report_tolerance;
  /// Called with the penalised objective at the start of every inner
  /// minimisation (step 0) and after every accepted step.
  std::function<void(int outer, int step, double value)> observer;
};

struct SolveResult {
  Trajectory trajectory;
  MultiplierVector lambda;
  double J = 0.0;
  std::vector<double> I;
  double gradient_norm = 0.0;    ///< sup-norm of grad(J - lambda.I) over free nodes
  double constraint_norm = 0.0;  ///< sup-norm of I - l
  int inner_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  bool normal = true;
  ConditionReport el_report;
  SolveSettings settings;
};

SolveResult solve_isoperimetric(const DelayedProblem& problem, const SolveSettings& settings = {});

/// Re-solves on a grid `factor` times finer, warm-started from the linear
/// interpolant of `previous`.
SolveResult refine(const DelayedProblem& problem, const SolveResult& previous, int factor);

/// Trajectory with the history sampled exactly and a straight line from
/// delta(t1) to the terminal value.
Trajectory linear_initial_guess(const DelayedProblem& problem, int intervals);

}  // namespace isodelay
