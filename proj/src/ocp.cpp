#include "isodelay/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace isodelay {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

/// Control-form jets and Hamiltonian partials at every node of [t1, t2].
class ControlGrid {
 public:
  ControlGrid(const HamiltonianContext& ctx, const Trajectory& traj, const ConditionOptions& opt)
      : ctx_(ctx), traj_(traj), grid_(ctx.problem(), traj, opt.kink_tol) {
    if (!traj.has_controls() || traj.m != ctx.m())
      throw ValidationError("trajectory", "control columns u0..u" + std::to_string(ctx.m() - 1) + " are required");
    if (!traj.has_costate()) throw ValidationError("trajectory", "costate columns p0..p" + std::to_string(ctx.n() - 1) + " are required");
    boundary_ = grid_.boundary() + opt.boundary_shift;
    if (boundary_ < grid_.first() || boundary_ > grid_.last())
      throw std::logic_error("regime boundary outside [t1, t2]");
    cache_.resize(static_cast<std::size_t>(grid_.last() + 1));
    done_.assign(cache_.size(), 0);
  }

  const DelayGrid& grid() const { return grid_; }
  int boundary() const { return boundary_; }

  void point(PointData& x, int i) const {
    const int m = grid_.shift();
    x.t = grid_.time(i);
    auto put = [](std::vector<double>& dst, std::span<const double> src) { dst.assign(src.begin(), src.end()); };
    put(x.q, traj_.state(i));
    put(x.u, traj_.control(i));
    put(x.qtau, traj_.state(i - m));
    put(x.utau, traj_.control(i - m));
    put(x.p, traj_.costate(i));
    put(x.lambda, ctx_.lambda().view());
  }

  const SlotPartials& H(int i) {
    if (i < grid_.first() || i > grid_.last())
      throw std::logic_error("Hamiltonian requested at t = " + std::to_string(grid_.time(i)) + " outside [t1, t2]");
    auto& slot = cache_[static_cast<std::size_t>(i)];
    if (!done_[static_cast<std::size_t>(i)]) {
      point(x_, i);
      ctx_.partials(x_.view(), slot);
      done_[static_cast<std::size_t>(i)] = 1;
    }
    return slot;
  }

  void require_forward(int i) const {
    if (i + grid_.shift() > grid_.last())
      throw std::logic_error("inner-regime formula at t = " + std::to_string(grid_.time(i)) +
                             " needs a forward value beyond t2");
  }

 private:
  const HamiltonianContext& ctx_;
  const Trajectory& traj_;
  DelayGrid grid_;
  int boundary_ = 0;
  PointData x_;
  std::vector<SlotPartials> cache_;
  std::vector<char> done_;
};

/// Finite-difference derivative of a node-major array restricted to nodes
/// [lo, hi]: centred inside, three-point one-sided at the ends.
double regime_derivative(const std::vector<double>& v, int width, int comp, int i, int lo, int hi, double h) {
  auto at = [&](int node) { return v[static_cast<std::size_t>(node) * width + comp]; };
  const int count = hi - lo + 1;
  if (count < 2) {
    if (lo > 0) return (at(i) - at(i - 1)) / h;
    throw std::logic_error("regime too short for a derivative");
  }
  if (i > lo && i < hi) return (at(i + 1) - at(i - 1)) / (2.0 * h);
  if (count < 3) return (at(hi) - at(lo)) / h;
  if (i == lo) return (-3.0 * at(i) + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * h);
  return (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h);
}

void add_node(ConditionReport& rep, const DelayGrid& g, int i, double r, Regime regime) {
  rep.nodes.push_back(i);
  rep.times.push_back(g.time(i));
  rep.residual.push_back(r);
  rep.regime.push_back(regime);
}

}  // namespace

HamiltonianContext::HamiltonianContext(const DelayedProblem& problem, MultiplierVector lambda)
    : problem_(&problem), lambda_(std::move(lambda)) {
  if (problem.mode != Mode::ocp) throw ValidationError("mode", "a Hamiltonian needs an ocp-mode problem");
  if (static_cast<int>(problem.dynamics.size()) != problem.n)
    throw ValidationError("phi", "expected " + std::to_string(problem.n) + " dynamics expressions");
  if (static_cast<int>(lambda_.size()) != problem.k)
    throw ValidationError("lambda", "expected " + std::to_string(problem.k) + " multipliers");
}

void HamiltonianContext::partials(const EvalPoint& x, SlotPartials& out) const {
  if (x.p.size() != static_cast<std::size_t>(n())) throw DomainError("costate p missing from the evaluation point");
  out.reset(n(), m());
  out.add(problem_->lagrangian, 1.0, x);
  for (int j = 0; j < k(); ++j)
    out.add(problem_->constraints[static_cast<std::size_t>(j)], -lambda_.lambda[static_cast<std::size_t>(j)], x);
  for (int c = 0; c < n(); ++c) {
    const Expression& phi = problem_->dynamics[static_cast<std::size_t>(c)];
    const double pc = x.p[static_cast<std::size_t>(c)];
    const double value = evaluate(phi, x);
    out.p[static_cast<std::size_t>(c)] = value;
    if (pc != 0.0) {
      out.add(phi, pc, x);
    }
  }
}

double hamiltonian_value(const HamiltonianContext& ctx, const EvalPoint& x) {
  const DelayedProblem& p = ctx.problem();
  std::span<const double> lambda = x.lambda.empty() ? ctx.lambda().view() : x.lambda;
  if (static_cast<int>(lambda.size()) != p.k) throw DomainError("lambda has the wrong dimension");
  if (x.p.size() != static_cast<std::size_t>(p.n)) throw DomainError("costate p missing from the evaluation point");
  double h = evaluate(p.lagrangian, x);
  for (int j = 0; j < p.k; ++j)
    h -= lambda[static_cast<std::size_t>(j)] * evaluate(p.constraints[static_cast<std::size_t>(j)], x);
  for (int c = 0; c < p.n; ++c) h += x.p[static_cast<std::size_t>(c)] * evaluate(p.dynamics[static_cast<std::size_t>(c)], x);
  return h;
}

std::vector<ConditionReport> pontryagin_residuals(const HamiltonianContext& ctx, const Trajectory& traj,
                                                  const ConditionOptions& opt) {
  ControlGrid cg(ctx, traj, opt);
  const DelayGrid& g = cg.grid();
  const int m = g.shift();
  const int first = g.first();
  const int b = cg.boundary();
  const int last = g.last();
  const int n = ctx.n();
  const double h = g.h();

  ConditionReport state, adjoint, stationarity, constraint;
  state.condition = "state_equation";
  adjoint.condition = "adjoint_equation";
  stationarity.condition = "stationarity";
  constraint.condition = "isoperimetric_constraint";

  for (int i = first; i <= last; ++i) {
    const bool inner = i <= b;
    const Regime regime = inner ? Regime::inner : Regime::outer;
    if (inner) cg.require_forward(i);
    const SlotPartials& now = cg.H(i);

    // state: qd - d6H
    if (g.kink(i)) {
      state.excluded.push_back(i);
    } else {
      double r = 0.0;
      for (int c = 0; c < n; ++c)
        r = std::max(r, std::abs(g.central(i)[static_cast<std::size_t>(c)] - now.p[static_cast<std::size_t>(c)]));
      add_node(state, g, i, r, regime);
    }

    // adjoint: pd + d2H(t) [+ d4H(t+tau)]
    // the difference stencil reads delayed slopes at i +- 1 as well
    if (g.touches_kink({i - 1, i, i + 1, i - 1 - m, i - m, i + 1 - m, i - 1 + m, i + m, i + 1 + m})) {
      adjoint.excluded.push_back(i);
    } else {
      const int lo = inner ? first : b + 1;
      const int hi = inner ? b : last;
      double r = 0.0;
      for (int c = 0; c < n; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        double v = regime_derivative(traj.p, n, c, i, lo, hi, h) + now.q[cc];
        if (inner) v += cg.H(i + m).qtau[cc];
        r = std::max(r, std::abs(v));
      }
      add_node(adjoint, g, i, r, regime);
    }

    // stationarity: d3H(t) [+ d5H(t+tau)]
    {
      std::vector<double> v = now.u;
      if (inner) {
        const auto& fwd = cg.H(i + m);
        for (std::size_t c = 0; c < v.size(); ++c) v[c] += fwd.utau[c];
      }
      add_node(stationarity, g, i, inf_norm(v), regime);
    }
  }

  // isoperimetric constraint |I - l| with node trapezoid
  const FunctionalValues fv = functional_value(ctx.problem(), traj);
  for (int j = 0; j < ctx.k(); ++j) {
    const double r = std::abs(fv.constraints[static_cast<std::size_t>(j)] - ctx.problem().levels[static_cast<std::size_t>(j)]);
    constraint.constants.push_back({"I[" + std::to_string(j) + "]", Regime::inner, {fv.constraints[static_cast<std::size_t>(j)]}});
    constraint.residual.push_back(r);
    constraint.nodes.push_back(j);
    constraint.times.push_back(kNaN);
    constraint.regime.push_back(Regime::inner);
  }

  std::vector<ConditionReport> out{std::move(state), std::move(adjoint), std::move(stationarity), std::move(constraint)};
  for (auto& rep : out) rep.finish(h, opt.tolerance);
  // the constraint rows are not nodal: no l2 over time
  out[3].l2_norm = out[3].sup_norm;
  return out;
}

HamiltonianDbr hamiltonian_dbr_residual(const HamiltonianContext& ctx, const Trajectory& traj,
                                        const ConditionOptions& opt) {
  ControlGrid cg(ctx, traj, opt);
  const DelayGrid& g = cg.grid();
  const int m = g.shift();
  const int first = g.first();
  const int b = cg.boundary();
  const int last = g.last();
  const double h = g.h();

  HamiltonianDbr out;
  out.constancy.condition = "hamiltonian_dubois_reymond";
  std::vector<double> q(static_cast<std::size_t>(last - first + 1));
  double acc = 0.0;
  for (int i = first; i <= last; ++i) {
    if (i > first) acc += 0.5 * h * (cg.H(i - 1).t + cg.H(i).t);
    q[static_cast<std::size_t>(i - first)] = cg.H(i).value - acc;
  }
  // nodes whose jets straddle a kink carry one-sided controls
  std::vector<char> skip(q.size(), 0);
  double mean = 0.0;
  int kept = 0;
  for (int i = first; i <= last; ++i) {
    if (g.touches_kink({i, i - m})) {
      skip[static_cast<std::size_t>(i - first)] = 1;
      continue;
    }
    mean += q[static_cast<std::size_t>(i - first)];
    ++kept;
  }
  if (kept > 0) mean /= kept;
  for (int i = first; i <= last; ++i) {
    if (skip[static_cast<std::size_t>(i - first)]) {
      out.constancy.excluded.push_back(i);
      continue;
    }
    add_node(out.constancy, g, i, std::abs(q[static_cast<std::size_t>(i - first)] - mean),
             i <= b ? Regime::inner : Regime::outer);
  }
  out.constancy.constants.push_back({"c", Regime::inner, {mean}});
  out.constancy.finish(h, opt.tolerance);

  out.hypothesis.condition = "hamiltonian_hypothesis";
  double narrow = 0.0;
  const int mu = ctx.m();
  for (int i = 0; i <= b; ++i) {
    cg.require_forward(i);
    if (g.touches_kink({i, i + m})) {
      out.hypothesis.excluded.push_back(i);
      continue;
    }
    const SlotPartials& fwd = cg.H(i + m);
    double r = dot(fwd.qtau, g.central(i));
    for (int c = 0; c < mu; ++c)
      r += fwd.utau[static_cast<std::size_t>(c)] * regime_derivative(traj.u, mu, c, i, 0, last, h);
    r = std::abs(r);
    add_node(out.hypothesis, g, i, r, i < m ? Regime::history : Regime::inner);
    if (i <= m) narrow = std::max(narrow, r);
  }
  out.hypothesis.finish(h, opt.tolerance);
  out.hypothesis.windows.push_back({"t1-tau..t2-tau", g.time(0), g.time(b), out.hypothesis.sup_norm, true});
  out.hypothesis.windows.push_back({"t1-tau..t1", g.time(0), g.time(m), narrow, true});
  out.hypothesis.finish(h, opt.tolerance);
  return out;
}

DelayedProblem to_control_form(const DelayedProblem& problem) {
  if (problem.mode != Mode::lagrangian) throw ValidationError("mode", "problem is already in control form");
  DelayedProblem out = problem;
  out.name = problem.name + "_control";
  out.mode = Mode::ocp;
  out.m = problem.n;
  auto rename = [](Slot s) {
    if (s.kind == SlotKind::qd) s.kind = SlotKind::u;
    else if (s.kind == SlotKind::qdtau) s.kind = SlotKind::utau;
    return s;
  };
  out.lagrangian = problem.lagrangian.map_slots(rename);
  for (auto& g : out.constraints) g = g.map_slots(rename);
  out.dynamics.clear();
  const SlotSpace space = out.slot_space();
  for (int c = 0; c < problem.n; ++c) out.dynamics.push_back(parse_expression("u[" + std::to_string(c) + "]", space));
  out.validate();
  return out;
}

Trajectory reduction_costate(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj) {
  if (problem.mode != Mode::lagrangian) throw ValidationError("mode", "reduction needs a Lagrangian problem");
  const DelayGrid g(problem, traj);
  const Integrand f = Integrand::augmented(problem, lambda.view());
  const int n = problem.n;
  const int m = g.shift();
  Trajectory out = traj;
  out.m = n;
  out.u.assign(traj.q.size(), 0.0);
  out.p.assign(traj.q.size(), kNaN);
  for (int i = 0; i <= g.last(); ++i) {
    const auto d = g.central(i);
    std::copy(d.begin(), d.end(), out.u.begin() + static_cast<std::ptrdiff_t>(i) * n);
  }
  PointData x;
  SlotPartials now, fwd;
  for (int i = g.first(); i <= g.last(); ++i) {
    g.fill(x, i, Side::center);
    now.reset(n);
    now.add(f, x.view());
    const bool inner = i <= g.boundary();
    if (inner) {
      g.fill(x, i + m, Side::center);
      fwd.reset(n);
      fwd.add(f, x.view());
    }
    for (int c = 0; c < n; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      out.p[static_cast<std::size_t>(i) * n + cc] = -(now.qd[cc] + (inner ? fwd.qdtau[cc] : 0.0));
    }
  }
  return out;
}

}  // namespace isodelay
