#pragma once

#include <vector>

#include "isodelay/conditions.hpp"

namespace isodelay {

/// H = L - lambda.g + p.phi for an ocp-mode problem at a fixed multiplier.
class HamiltonianContext {
 public:
  HamiltonianContext(const DelayedProblem& problem, MultiplierVector lambda);
  HamiltonianContext(DelayedProblem&&, MultiplierVector) = delete;

  const DelayedProblem& problem() const { return *problem_; }
  const MultiplierVector& lambda() const { return lambda_; }
  int n() const { return problem_->n; }
  int m() const { return problem_->m; }
  int k() const { return problem_->k; }

  /// Value and partials of H at x (x.p supplies the costate). The p
  /// partials equal phi.
  void partials(const EvalPoint& x, SlotPartials& out) const;

 private:
  const DelayedProblem* problem_;
  MultiplierVector lambda_;
};

/// H at x; the multiplier is taken from x.lambda when present, otherwise
/// from the context.
double hamiltonian_value(const HamiltonianContext& ctx, const EvalPoint& x);

/// State equation, adjoint equation, stationarity and the isoperimetric
/// constraint, in that order. Requires u and p columns.
std::vector<ConditionReport> pontryagin_residuals(const HamiltonianContext& ctx, const Trajectory& traj,
                                                  const ConditionOptions& opt = {});

struct HamiltonianDbr {
  ConditionReport constancy;   ///< H - integral of d1H, over [t1, t2]
  ConditionReport hypothesis;  ///< d4H(t+tau).qd + d5H(t+tau).ud on [t1-tau, t2-tau]
};

HamiltonianDbr hamiltonian_dbr_residual(const HamiltonianContext& ctx, const Trajectory& traj,
                                        const ConditionOptions& opt = {});

/// Control form of a Lagrangian problem: u replaces qd, utau replaces qdtau
/// and the dynamics are qd = u.
DelayedProblem to_control_form(const DelayedProblem& problem);

/// Adds u = qd and the costate p = -(d3F + d5F(t+tau)) (d5 dropped on the
/// outer regime) to a Lagrangian trajectory. p is NaN on the history.
Trajectory reduction_costate(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj);

}  // namespace isodelay
