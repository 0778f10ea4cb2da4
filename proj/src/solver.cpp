#include "isodelay/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace isodelay {

namespace {

/// Trapezoid value of `f` and its gradient over the free nodes, accumulated
/// cell by cell; each cell endpoint contributes through q, qtau and the
/// slopes of the cell and of the delayed cell.
long double integrand_gradient(const DelayGrid& g, const Integrand& f, std::vector<double>* grad) {
  const int n = g.n();
  const int m = g.shift();
  const int last = g.last();
  const double h = g.h();
  const double w = 0.5 * h;
  if (grad) grad->assign(static_cast<std::size_t>(std::max(0, last - m - 1)) * n, 0.0);
  auto add = [&](int node, std::span<const double> v, double scale) {
    if (!grad || node <= m || node >= last) return;
    double* dst = grad->data() + static_cast<std::size_t>(node - m - 1) * n;
    for (int c = 0; c < n; ++c) dst[c] += scale * v[static_cast<std::size_t>(c)];
  };

  long double value = 0.0L;
  PointData x;
  SlotPartials sp;
  for (int c = m; c < last; ++c) {
    for (auto [node, side] : {std::pair{c, Side::right}, std::pair{c + 1, Side::left}}) {
      g.fill(x, node, side);
      if (!grad) {
        value += static_cast<long double>(w * f.value(x.view()));
        continue;
      }
      sp.reset(n);
      sp.add(f, x.view());
      value += static_cast<long double>(w * sp.value);
      add(node, sp.q, w);
      add(node - m, sp.qtau, w);
      add(c + 1, sp.qd, 0.5);
      add(c, sp.qd, -0.5);
      if (c - m >= m) {
        add(c - m + 1, sp.qdtau, 0.5);
        add(c - m, sp.qdtau, -0.5);
      }
    }
  }
  return value;
}

double sup_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

struct Values {
  long double J = 0.0L;
  std::vector<long double> I;
};

Values functional_values(const DelayGrid& g, const DelayedProblem& p) {
  Values out;
  out.J = integrand_gradient(g, Integrand::single(p.lagrangian), nullptr);
  for (const auto& e : p.constraints) out.I.push_back(integrand_gradient(g, Integrand::single(e), nullptr));
  return out;
}

/// Penalized functional J - lambda.I + rho/2 |I - l|^2 over the free nodes.
class Penalized {
 public:
  Penalized(const DelayedProblem& p, Trajectory& traj) : p_(p), traj_(traj) {
    const DelayGrid g(p, traj);
    m_ = g.shift();
    last_ = g.last();
  }

  std::size_t size() const { return static_cast<std::size_t>(last_ - m_ - 1) * p_.n; }
  int components() const { return p_.n; }
  double step() const { return traj_.h; }

  void read(std::vector<double>& x) const {
    x.assign(traj_.q.begin() + static_cast<std::ptrdiff_t>((m_ + 1) * p_.n),
             traj_.q.begin() + static_cast<std::ptrdiff_t>(last_ * p_.n));
  }
  void write(const std::vector<double>& x) {
    std::copy(x.begin(), x.end(), traj_.q.begin() + static_cast<std::ptrdiff_t>((m_ + 1) * p_.n));
  }

  /// Value at the current trajectory; gradient when requested.
  long double eval(std::span<const double> lambda, double rho, std::vector<double>* grad) const {
    const DelayGrid g(p_, traj_);
    const Values v = functional_values(g, p_);
    long double phi = v.J;
    std::vector<double> eff(lambda.begin(), lambda.end());
    for (std::size_t j = 0; j < eff.size(); ++j) {
      const long double r = v.I[j] - static_cast<long double>(p_.levels[j]);
      phi += -static_cast<long double>(lambda[j]) * v.I[j] + 0.5L * rho * r * r;
      eff[j] = lambda[j] - rho * static_cast<double>(r);
    }
    if (grad) integrand_gradient(g, Integrand::augmented(p_, eff), grad);
    return phi;
  }

 private:
  const DelayedProblem& p_;
  Trajectory& traj_;
  int m_ = 0;
  int last_ = 0;
};

/// In-place solve with tridiag(-1, 2, -1) per component (Thomas algorithm);
/// the discrete Laplacian approximates the Hessian of velocity terms.
void laplacian_solve(std::vector<double>& v, int n) {
  const std::size_t rows = v.size() / static_cast<std::size_t>(n);
  if (rows == 0) return;
  std::vector<double> c(rows);
  for (int comp = 0; comp < n; ++comp) {
    auto at = [&](std::size_t i) -> double& { return v[i * static_cast<std::size_t>(n) + comp]; };
    double denom = 2.0;
    c[0] = -1.0 / denom;
    at(0) /= denom;
    for (std::size_t i = 1; i < rows; ++i) {
      denom = 2.0 + c[i - 1];
      c[i] = -1.0 / denom;
      at(i) = (at(i) + at(i - 1)) / denom;
    }
    for (std::size_t i = rows - 1; i-- > 0;) at(i) -= c[i] * at(i + 1);
  }
}

struct InnerStats {
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// L-BFGS with backtracking. Accepted steps do not increase the objective
/// beyond a round-off slack of 1e-13 (1 + |f|).
InnerStats minimize(Penalized& fn, std::span<const double> lambda, double rho, const SolveSettings& s, int outer) {
  InnerStats st;
  const std::size_t dim = fn.size();
  std::vector<double> x, grad, x_new, grad_new, dir(dim);
  fn.read(x);
  long double fx = fn.eval(lambda, rho, &grad);
  st.gradient_norm = sup_norm(grad);
  if (s.observer) s.observer(outer, 0, static_cast<double>(fx));
  if (dim == 0) {
    st.converged = true;
    return st;
  }
  std::deque<std::vector<double>> S, Y;
  std::deque<double> rhos;
  std::vector<double> alpha(static_cast<std::size_t>(s.lbfgs_memory));

  while (st.gradient_norm > s.inner_tolerance && st.iterations < s.max_inner) {
    // two-loop recursion
    dir = grad;
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha[k] = rhos[k] * std::inner_product(S[k].begin(), S[k].end(), dir.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) dir[i] -= alpha[k] * Y[k][i];
    }
    // preconditioned initial matrix gamma * T^-1
    laplacian_solve(dir, fn.components());
    double gamma = fn.step();
    if (!S.empty()) {
      std::vector<double> ty = Y.back();
      laplacian_solve(ty, fn.components());
      gamma = std::inner_product(S.back().begin(), S.back().end(), Y.back().begin(), 0.0) /
              std::inner_product(Y.back().begin(), Y.back().end(), ty.begin(), 0.0);
    }
    for (double& d : dir) d *= gamma;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rhos[k] * std::inner_product(Y[k].begin(), Y[k].end(), dir.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) dir[i] += S[k][i] * (alpha[k] - beta);
    }
    for (double& d : dir) d = -d;
    double slope = std::inner_product(grad.begin(), grad.end(), dir.begin(), 0.0);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rhos.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i] / std::max(1.0, sup_norm(grad));
      slope = std::inner_product(grad.begin(), grad.end(), dir.begin(), 0.0);
    }

    // Armijo, or the approximate Wolfe test once value differences sink
    // into round-off; the gradient stays accurate where values do not.
    const long double slack = 1e-13L * (1.0L + std::abs(fx));
    double step = 1.0;
    bool accepted = false;
    long double f_new = 0.0L;
    x_new.resize(dim);
    for (int tries = 0; tries < 50; ++tries) {
      for (std::size_t i = 0; i < dim; ++i) x_new[i] = x[i] + step * dir[i];
      fn.write(x_new);
      f_new = fn.eval(lambda, rho, &grad_new);
      if (std::isfinite(static_cast<double>(f_new))) {
        if (f_new <= fx + 1e-4L * step * slope) {
          accepted = true;
          break;
        }
        const double d_new = std::inner_product(grad_new.begin(), grad_new.end(), dir.begin(), 0.0);
        if (f_new <= fx + slack && d_new >= 0.9 * slope && d_new <= -0.8 * slope) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      fn.write(x);
      break;
    }
    ++st.iterations;

    std::vector<double> sv(dim), yv(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      sv[i] = x_new[i] - x[i];
      yv[i] = grad_new[i] - grad[i];
    }
    const double sy = std::inner_product(sv.begin(), sv.end(), yv.begin(), 0.0);
    if (sy > 1e-300) {
      S.push_back(std::move(sv));
      Y.push_back(std::move(yv));
      rhos.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > s.lbfgs_memory) {
        S.pop_front();
        Y.pop_front();
        rhos.pop_front();
      }
    }
    x.swap(x_new);
    grad.swap(grad_new);
    fx = f_new;
    st.gradient_norm = sup_norm(grad);
    if (s.observer) s.observer(outer, st.iterations, static_cast<double>(fx));
  }
  fn.write(x);
  st.converged = st.gradient_norm <= s.inner_tolerance;
  return st;
}

}  // namespace

ObjectiveValue discretized_objective(const DelayedProblem& problem, const MultiplierVector& lambda,
                                     const Trajectory& traj) {
  if (static_cast<int>(lambda.size()) != problem.k)
    throw ValidationError("lambda", "expected " + std::to_string(problem.k) + " multipliers");
  const DelayGrid g(problem, traj);
  ObjectiveValue out;
  out.value = static_cast<double>(integrand_gradient(g, Integrand::augmented(problem, lambda.view()), &out.gradient));
  return out;
}

Trajectory linear_initial_guess(const DelayedProblem& problem, int intervals) {
  if (static_cast<int>(problem.terminal.size()) != problem.n)
    throw ValidationError("terminal", "a terminal value is required to solve");
  const double t1 = problem.t1;
  const double t2 = problem.t2;
  Trajectory traj = sample_trajectory(problem, intervals, [&](int c, double t) {
    const double a = problem.history.value(c, t1);
    return a + (problem.terminal[static_cast<std::size_t>(c)] - a) * (t - t1) / (t2 - t1);
  });
  // exact boundary values at both ends
  const int last = traj.nodes() - 1;
  for (int c = 0; c < problem.n; ++c)
    traj.q[static_cast<std::size_t>(last) * problem.n + c] = problem.terminal[static_cast<std::size_t>(c)];
  return traj;
}

SolveResult solve_isoperimetric(const DelayedProblem& problem, const SolveSettings& settings) {
  problem.validate();
  if (problem.mode != Mode::lagrangian) throw ValidationError("mode", "the solver handles lagrangian problems only");
  if (settings.intervals < 2) throw ValidationError("n", "need at least two intervals");
  if (!(settings.inner_tolerance > 0.0) || !(settings.outer_tolerance > 0.0))
    throw ValidationError("tol", "tolerances must be positive");
  const double h = (problem.t2 - problem.t1) / settings.intervals;
  const int m = commensurate_shift(problem.tau, h);
  if (settings.intervals < 2 * m)
    throw ValidationError("n", "need N >= 2 tau / h = " + std::to_string(2 * m));

  SolveResult res;
  res.settings = settings;
  res.trajectory = settings.initial ? *settings.initial : linear_initial_guess(problem, settings.intervals);
  {
    const DelayGrid check(problem, res.trajectory);
    if (check.last() - check.first() != settings.intervals)
      throw ValidationError("initial", "warm start does not match the requested grid");
    const int last = check.last();
    for (int c = 0; c < problem.n; ++c)
      if (res.trajectory.q[static_cast<std::size_t>(last) * problem.n + c] != problem.terminal[static_cast<std::size_t>(c)])
        throw ValidationError("initial", "warm start must end at the terminal value");
  }
  res.trajectory.kink_set.clear();

  std::vector<double> lambda = settings.initial_lambda;
  if (lambda.empty()) lambda.assign(static_cast<std::size_t>(problem.k), 0.0);
  if (static_cast<int>(lambda.size()) != problem.k) throw ValidationError("lambda", "initial guess has wrong size");

  Penalized fn(problem, res.trajectory);
  double rho = settings.penalty;
  double prev_norm = std::numeric_limits<double>::infinity();
  std::vector<double> prev_lambda, prev_r;
  for (int outer = 0; outer < settings.max_outer; ++outer) {
    const InnerStats st = minimize(fn, lambda, rho, settings, outer);
    res.inner_iterations += st.iterations;
    res.outer_iterations = outer + 1;

    const DelayGrid g(problem, res.trajectory);
    const Values v = functional_values(g, problem);
    std::vector<double> r(static_cast<std::size_t>(problem.k));
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = static_cast<double>(v.I[j] - problem.levels[j]);
    const double rn = sup_norm(r);

    std::vector<double> next = lambda;
    for (std::size_t j = 0; j < r.size(); ++j) next[j] = lambda[j] - rho * r[j];

    res.constraint_norm = rn;
    res.gradient_norm = st.gradient_norm;
    if (rn <= settings.outer_tolerance && st.converged) {
      // grad(J - lambda_eff.I) is the penalized gradient just minimized
      lambda = next;
      res.converged = true;
      break;
    }
    // the secant model r(lambda) is only valid at a fixed penalty
    if (settings.update == MultiplierUpdate::secant && problem.k == 1 && !prev_r.empty() && r[0] != prev_r[0]) {
      const double cand = lambda[0] - r[0] * (lambda[0] - prev_lambda[0]) / (r[0] - prev_r[0]);
      if (std::isfinite(cand)) next[0] = cand;
    }
    if (rn > 0.25 * prev_norm) {
      rho = std::min(rho * settings.penalty_growth, settings.penalty_cap);
      prev_norm = rn;
      prev_lambda.clear();
      prev_r.clear();
      lambda = next;
      continue;
    }
    prev_norm = rn;
    prev_lambda = lambda;
    prev_r = r;
    lambda = next;
  }

  res.lambda = MultiplierVector(lambda);
  const FunctionalValues fv = functional_value(problem, res.trajectory);
  res.J = fv.objective;
  res.I = fv.constraints;
  res.gradient_norm = sup_norm(discretized_objective(problem, res.lambda, res.trajectory).gradient);
  if (res.converged && res.gradient_norm > settings.inner_tolerance) res.converged = false;

  ConditionOptions opt;
  opt.tolerance = settings.report_tolerance.value_or(10.0 * h * h);
  res.el_report = el_residual(problem, res.lambda, res.trajectory, opt);
  res.normal = !abnormality_check(problem, res.trajectory, opt).abnormal;
  return res;
}

SolveResult refine(const DelayedProblem& problem, const SolveResult& previous, int factor) {
  if (factor < 2) throw ValidationError("factor", "refinement factor must be an integer >= 2");
  SolveSettings s = previous.settings;
  s.intervals = previous.settings.intervals * factor;
  s.initial_lambda = previous.lambda.lambda;

  const Trajectory& old = previous.trajectory;
  const DelayGrid g(problem, old);
  const int n = problem.n;
  const int old_first = g.first();
  Trajectory fine = sample_trajectory(problem, s.intervals, [&](int c, double t) {
    const double r = (t - old.t_start) / old.h;
    const int cell = std::clamp(static_cast<int>(std::floor(r)), old_first, g.last() - 1);
    const double a = r - cell;
    return (1.0 - a) * old.q[static_cast<std::size_t>(cell) * n + c] + a * old.q[static_cast<std::size_t>(cell + 1) * n + c];
  });
  const int last = fine.nodes() - 1;
  for (int c = 0; c < n; ++c) fine.q[static_cast<std::size_t>(last) * n + c] = old.q[static_cast<std::size_t>(g.last()) * n + c];
  s.initial = std::move(fine);
  return solve_isoperimetric(problem, s);
}

}  // namespace isodelay
