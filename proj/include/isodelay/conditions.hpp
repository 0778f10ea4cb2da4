#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isodelay/model.hpp"

namespace isodelay {

/// Weighted sum of problem expressions, e.g. L - lambda.g or a single g_j.
struct Integrand {
  std::vector<std::pair<const Expression*, double>> terms;

  /// F = L - lambda.g.
  static Integrand augmented(const DelayedProblem& problem, std::span<const double> lambda);
  static Integrand single(const Expression& e) { return {{{&e, 1.0}}}; }

  double value(const EvalPoint& x) const;
};

/// Value and dense partials of a scalar function, one vector per slot kind.
struct SlotPartials {
  double value = 0.0;
  double t = 0.0;
  std::vector<double> q, qd, qtau, qdtau, u, utau, p;

  void reset(int n, int m = 0);
  std::vector<double>& of(SlotKind kind);
  const std::vector<double>& of(SlotKind kind) const;
  /// Adds weight * (value, partials) of e at x.
  void add(const Expression& e, double weight, const EvalPoint& x);
  void add(const Integrand& f, const EvalPoint& x);
};

/// L(x) - lambda.g(x).
double augmented_value(const DelayedProblem& problem, const MultiplierVector& lambda, const EvalPoint& x);

enum class Regime { history, inner, outer };
std::string_view to_string(Regime regime);

/// Sup-norm of a report restricted to a time window.
struct Window {
  std::string name;
  double from = 0.0;
  double to = 0.0;
  double sup_norm = 0.0;
  bool pass = true;
};

/// Value of a constant of integration fitted on one regime.
struct RegimeConstant {
  std::string name;
  Regime regime = Regime::inner;
  std::vector<double> value;
};

struct ConditionReport {
  std::string condition;
  std::vector<int> nodes;
  std::vector<double> times;
  std::vector<double> residual;
  std::vector<Regime> regime;
  /// Secondary differentiated-form residual aligned with `nodes`; NaN where
  /// the stencil is unavailable. Empty when the condition has no such form.
  std::vector<double> differentiated;
  /// Nodes dropped because their stencil touches a kink.
  std::vector<int> excluded;
  std::vector<RegimeConstant> constants;
  std::vector<Window> windows;
  double sup_norm = 0.0;
  double l2_norm = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  /// Sets sup/l2 norms and the verdict from `residual`.
  void finish(double h, double tol);
};

struct NoetherProfile {
  std::vector<int> nodes;
  std::vector<double> times;
  std::vector<double> value;
  std::vector<Regime> regime;
  std::vector<int> excluded;
  double drift = 0.0;
  double inner_drift = 0.0;
  double outer_drift = 0.0;
  int boundary = 0;  ///< node index of t2 - tau
};

struct ConditionOptions {
  double tolerance = 1e-8;
  double kink_tol = kDefaultKinkTolerance;
  /// Moves the regime boundary by this many nodes. Test hook only: a
  /// positive shift asks for forward values past t2 and throws.
  int boundary_shift = 0;
};

/// Integrated Euler-Lagrange residual of an arbitrary integrand. The
/// bracket minus the running integral of the right-hand side is fitted by
/// its mean on each regime; the residual is the deviation from that mean.
ConditionReport euler_lagrange_report(const DelayGrid& grid, const Integrand& f, const ConditionOptions& opt,
                                      std::string name = "euler_lagrange");

ConditionReport el_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                            const ConditionOptions& opt = {});
ConditionReport cdur_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                              const ConditionOptions& opt = {});

/// DuBois-Reymond residual. `bracket`, when non-null, receives the
/// quantity F - qd.(d3F + d5F(t+tau)) (d5 dropped on the outer regime) for
/// every node of [t1, t2], indexed by node - first(); NaN where undefined.
ConditionReport dbr_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                             const ConditionOptions& opt = {}, std::vector<double>* bracket = nullptr);

NoetherProfile noether_constant(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                                const Symmetry& sym, const ConditionOptions& opt = {});

struct Subinterval {
  double from = 0.0;
  double to = 0.0;
};

/// d/ds at s = 0 of the transformed integral over `sub` (central difference
/// in s) minus the integral of the gauge derivative. Defaults to [t1, t2].
double invariance_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Symmetry& sym,
                           const Trajectory& traj, std::optional<Subinterval> sub = std::nullopt);

struct AbnormalityResult {
  bool abnormal = false;
  std::vector<ConditionReport> rows;  ///< one integrated EL report per g_j
};

/// A trajectory is abnormal when every constraint integrand satisfies its
/// own Euler-Lagrange system within `opt.tolerance`. k = 0 is normal.
AbnormalityResult abnormality_check(const DelayedProblem& problem, const Trajectory& traj,
                                    const ConditionOptions& opt = {});

}  // namespace isodelay
