#include "isodelay/conditions.hpp"

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

void check_lambda(const DelayedProblem& problem, const MultiplierVector& lambda) {
  if (static_cast<int>(lambda.size()) != problem.k)
    throw ValidationError("lambda", "expected " + std::to_string(problem.k) + " multipliers, got " +
                                        std::to_string(lambda.size()));
}

/// Regime layout after the optional test shift of the boundary node.
struct Layout {
  int first;
  int boundary;
  int last;
  int shift;
};

Layout layout(const DelayGrid& g, const ConditionOptions& opt) {
  const int b = g.boundary() + opt.boundary_shift;
  if (b < g.first() || b > g.last()) throw std::logic_error("regime boundary outside [t1, t2]");
  return {g.first(), b, g.last(), g.shift()};
}

void require_forward(const DelayGrid& g, int i) {
  if (i + g.shift() > g.last())
    throw std::logic_error("inner-regime formula at t = " + std::to_string(g.time(i)) +
                           " needs a forward value beyond t2");
}

/// Partials of an integrand at every node of [first, last] for one side,
/// computed lazily.
class JetCache {
 public:
  JetCache(const DelayGrid& g, const Integrand& f, Side side) : g_(g), f_(f), side_(side) {
    cache_.resize(static_cast<std::size_t>(g.last() + 1));
    done_.assign(static_cast<std::size_t>(g.last() + 1), 0);
  }

  const SlotPartials& at(int i) {
    if (i < g_.first() || i > g_.last()) throw std::logic_error("jet requested outside [t1, t2]");
    auto& slot = cache_[static_cast<std::size_t>(i)];
    if (!done_[static_cast<std::size_t>(i)]) {
      g_.fill(point_, i, side_);
      slot.reset(g_.n());
      slot.add(f_, point_.view());
      done_[static_cast<std::size_t>(i)] = 1;
    }
    return slot;
  }

 private:
  const DelayGrid& g_;
  const Integrand& f_;
  Side side_;
  PointData point_;
  std::vector<SlotPartials> cache_;
  std::vector<char> done_;
};

struct Jets {
  JetCache center, left, right;
  Jets(const DelayGrid& g, const Integrand& f)
      : center(g, f, Side::center), left(g, f, Side::left), right(g, f, Side::right) {}
};

double inf_dev(std::span<const double> a, std::span<const double> mean) {
  double r = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) r = std::max(r, std::abs(a[c] - mean[c]));
  return r;
}

/// Component-wise mean of rows over the node indices in `use`.
std::vector<double> mean_of(const std::vector<std::vector<double>>& rows, const std::vector<int>& use, int offset,
                            int width) {
  std::vector<double> m(static_cast<std::size_t>(width), 0.0);
  if (use.empty()) {
    std::fill(m.begin(), m.end(), kNaN);
    return m;
  }
  for (int i : use)
    for (int c = 0; c < width; ++c) m[static_cast<std::size_t>(c)] += rows[static_cast<std::size_t>(i - offset)][static_cast<std::size_t>(c)];
  for (double& v : m) v /= static_cast<double>(use.size());
  return m;
}

/// Running quantity Q(i) = B(i) - integral from the regime start, on both
/// regimes, with per-node kink exclusion. Fills a report.
struct TwoRegime {
  int width = 1;
  // indexed by node - first
  std::vector<std::vector<double>> inner_q, outer_q;
  std::vector<char> inner_ok, outer_ok;
};

void assemble(const DelayGrid& g, const Layout& L, const TwoRegime& tr, ConditionReport& rep,
              const std::string& inner_name, const std::string& outer_name) {
  std::vector<int> inner_use, outer_use;
  for (int i = L.first; i <= L.boundary; ++i)
    if (tr.inner_ok[static_cast<std::size_t>(i - L.first)]) inner_use.push_back(i);
  for (int i = L.boundary; i <= L.last; ++i)
    if (tr.outer_ok[static_cast<std::size_t>(i - L.first)]) outer_use.push_back(i);
  const auto inner_mean = mean_of(tr.inner_q, inner_use, L.first, tr.width);
  const auto outer_mean = mean_of(tr.outer_q, outer_use, L.first, tr.width);
  for (int i = L.first; i <= L.last; ++i) {
    const auto k = static_cast<std::size_t>(i - L.first);
    double r = -1.0;
    if (i <= L.boundary && tr.inner_ok[k]) r = std::max(r, inf_dev(tr.inner_q[k], inner_mean));
    if (i >= L.boundary && tr.outer_ok[k]) r = std::max(r, inf_dev(tr.outer_q[k], outer_mean));
    if (r < 0.0) {
      rep.excluded.push_back(i);
      continue;
    }
    rep.nodes.push_back(i);
    rep.times.push_back(g.time(i));
    rep.residual.push_back(r);
    rep.regime.push_back(i <= L.boundary ? Regime::inner : Regime::outer);
  }
  rep.constants.push_back({inner_name, Regime::inner, inner_mean});
  rep.constants.push_back({outer_name, Regime::outer, outer_mean});
}

}  // namespace

// ---------------------------------------------------------------------------

Integrand Integrand::augmented(const DelayedProblem& problem, std::span<const double> lambda) {
  if (lambda.size() != problem.constraints.size())
    throw ValidationError("lambda", "expected " + std::to_string(problem.constraints.size()) + " multipliers");
  Integrand f;
  f.terms.emplace_back(&problem.lagrangian, 1.0);
  for (std::size_t j = 0; j < lambda.size(); ++j) f.terms.emplace_back(&problem.constraints[j], -lambda[j]);
  return f;
}

double Integrand::value(const EvalPoint& x) const {
  double v = 0.0;
  for (const auto& [e, w] : terms)
    if (w != 0.0) v += w * evaluate(*e, x);
  return v;
}

void SlotPartials::reset(int n, int m) {
  value = 0.0;
  t = 0.0;
  for (auto* v : {&q, &qd, &qtau, &qdtau, &p}) v->assign(static_cast<std::size_t>(n), 0.0);
  for (auto* v : {&u, &utau}) v->assign(static_cast<std::size_t>(m), 0.0);
}

std::vector<double>& SlotPartials::of(SlotKind kind) {
  switch (kind) {
    case SlotKind::q: return q;
    case SlotKind::qd: return qd;
    case SlotKind::qtau: return qtau;
    case SlotKind::qdtau: return qdtau;
    case SlotKind::u: return u;
    case SlotKind::utau: return utau;
    case SlotKind::p: return p;
    default: break;
  }
  throw std::logic_error("no dense partial storage for slot kind " + std::string(to_string(kind)));
}

const std::vector<double>& SlotPartials::of(SlotKind kind) const {
  return const_cast<SlotPartials*>(this)->of(kind);
}

void SlotPartials::add(const Expression& e, double weight, const EvalPoint& x) {
  if (weight == 0.0) return;
  const DualValue d = gradient(e, x);
  value += weight * d.value();
  const auto& slots = e.free_slots();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double w = weight * d.partial(s);
    if (slots[s].kind == SlotKind::t) {
      t += w;
    } else if (slots[s].kind != SlotKind::lambda) {
      of(slots[s].kind).at(static_cast<std::size_t>(slots[s].index)) += w;
    }
  }
}

void SlotPartials::add(const Integrand& f, const EvalPoint& x) {
  for (const auto& [e, w] : f.terms) add(*e, w, x);
}

double augmented_value(const DelayedProblem& problem, const MultiplierVector& lambda, const EvalPoint& x) {
  check_lambda(problem, lambda);
  return Integrand::augmented(problem, lambda.view()).value(x);
}

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::history: return "history";
    case Regime::inner: return "inner";
    case Regime::outer: return "outer";
  }
  return "?";
}

void ConditionReport::finish(double h, double tol) {
  sup_norm = 0.0;
  double sq = 0.0;
  for (double r : residual) {
    sup_norm = std::max(sup_norm, r);
    sq += r * r;
  }
  l2_norm = std::sqrt(h * sq);
  tolerance = tol;
  pass = sup_norm <= tol;
  for (auto& w : windows) w.pass = w.sup_norm <= tol;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange

ConditionReport euler_lagrange_report(const DelayGrid& g, const Integrand& f, const ConditionOptions& opt,
                                      std::string name) {
  const Layout L = layout(g, opt);
  const int n = g.n();
  const int m = L.shift;
  const double h = g.h();
  Jets jet(g, f);

  const auto count = static_cast<std::size_t>(L.last - L.first + 1);
  TwoRegime tr;
  tr.width = n;
  tr.inner_q.assign(count, std::vector<double>(static_cast<std::size_t>(n), 0.0));
  tr.outer_q = tr.inner_q;
  tr.inner_ok.assign(count, 0);
  tr.outer_ok.assign(count, 0);
  std::vector<std::vector<double>> inner_b = tr.inner_q, outer_b = tr.inner_q;

  // inner: bracket d3F(t) + d5F(t+tau), right side d2F(t) + d4F(t+tau)
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  for (int i = L.first; i <= L.boundary; ++i) {
    require_forward(g, i);
    const auto k = static_cast<std::size_t>(i - L.first);
    if (i > L.first) {
      const int c = i - 1;
      const auto& a0 = jet.right.at(c);
      const auto& a1 = jet.right.at(c + m);
      const auto& b0 = jet.left.at(c + 1);
      const auto& b1 = jet.left.at(c + 1 + m);
      for (int j = 0; j < n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        acc[jj] += 0.5 * h * (a0.q[jj] + a1.qtau[jj] + b0.q[jj] + b1.qtau[jj]);
      }
    }
    const auto& now = jet.center.at(i);
    const auto& fwd = jet.center.at(i + m);
    for (int j = 0; j < n; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      inner_b[k][jj] = now.qd[jj] + fwd.qdtau[jj];
      tr.inner_q[k][jj] = inner_b[k][jj] - acc[jj];
    }
    tr.inner_ok[k] = !g.touches_kink({i, i - m, i + m});
  }

  // outer: bracket d3F(t), right side d2F(t)
  std::fill(acc.begin(), acc.end(), 0.0);
  for (int i = L.boundary; i <= L.last; ++i) {
    const auto k = static_cast<std::size_t>(i - L.first);
    if (i > L.boundary) {
      const auto& a0 = jet.right.at(i - 1);
      const auto& b0 = jet.left.at(i);
      for (int j = 0; j < n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        acc[jj] += 0.5 * h * (a0.q[jj] + b0.q[jj]);
      }
    }
    const auto& now = jet.center.at(i);
    for (int j = 0; j < n; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      outer_b[k][jj] = now.qd[jj];
      tr.outer_q[k][jj] = outer_b[k][jj] - acc[jj];
    }
    tr.outer_ok[k] = !g.touches_kink({i, i - m});
  }

  ConditionReport rep;
  rep.condition = std::move(name);
  assemble(g, L, tr, rep, "c1", "c2");

  // secondary differentiated form
  rep.differentiated.reserve(rep.nodes.size());
  for (std::size_t r = 0; r < rep.nodes.size(); ++r) {
    const int i = rep.nodes[r];
    const bool inner = i <= L.boundary;
    const int lo = inner ? L.first : L.boundary;
    const int hi = inner ? L.boundary : L.last;
    const auto& ok = inner ? tr.inner_ok : tr.outer_ok;
    const auto& br = inner ? inner_b : outer_b;
    if (i - 1 < lo || i + 1 > hi || !ok[static_cast<std::size_t>(i - 1 - L.first)] ||
        !ok[static_cast<std::size_t>(i - L.first)] || !ok[static_cast<std::size_t>(i + 1 - L.first)]) {
      rep.differentiated.push_back(kNaN);
      continue;
    }
    const auto& now = jet.center.at(i);
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      double rhs = now.q[jj];
      if (inner) rhs += jet.center.at(i + m).qtau[jj];
      const double d = (br[static_cast<std::size_t>(i + 1 - L.first)][jj] - br[static_cast<std::size_t>(i - 1 - L.first)][jj]) /
                       (2.0 * h);
      worst = std::max(worst, std::abs(d - rhs));
    }
    rep.differentiated.push_back(worst);
  }
  rep.finish(h, opt.tolerance);
  return rep;
}

ConditionReport el_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                            const ConditionOptions& opt) {
  check_lambda(problem, lambda);
  const DelayGrid g(problem, traj, opt.kink_tol);
  return euler_lagrange_report(g, Integrand::augmented(problem, lambda.view()), opt);
}

// ---------------------------------------------------------------------------
// CDUR

ConditionReport cdur_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                              const ConditionOptions& opt) {
  check_lambda(problem, lambda);
  const DelayGrid g(problem, traj, opt.kink_tol);
  const Layout L = layout(g, opt);
  const Integrand f = Integrand::augmented(problem, lambda.view());
  JetCache fwd(g, f, Side::center);
  const int m = L.shift;

  ConditionReport rep;
  rep.condition = "cdur";
  double narrow = 0.0;
  for (int i = 0; i <= L.boundary; ++i) {
    if (i + m > L.last)
      throw std::logic_error("cdur at t = " + std::to_string(g.time(i)) + " needs a forward value beyond t2");
    if (g.touches_kink({i, i + m})) {
      rep.excluded.push_back(i);
      continue;
    }
    const auto& d = fwd.at(i + m);
    const double r = std::abs(dot(d.qtau, g.central(i)) + dot(d.qdtau, g.second(i)));
    rep.nodes.push_back(i);
    rep.times.push_back(g.time(i));
    rep.residual.push_back(r);
    rep.regime.push_back(i < m ? Regime::history : Regime::inner);
    if (i <= m) narrow = std::max(narrow, r);
  }
  rep.finish(g.h(), opt.tolerance);
  rep.windows.push_back({"t1-tau..t2-tau", g.time(0), g.time(L.boundary), rep.sup_norm, true});
  rep.windows.push_back({"t1-tau..t1", g.time(0), g.time(m), narrow, true});
  rep.finish(g.h(), opt.tolerance);
  return rep;
}

// ---------------------------------------------------------------------------
// DuBois-Reymond and Noether

namespace {

/// F - qd.(d3F + d5F(t+tau)) on the inner regime, F - qd.d3F on the outer.
double energy_bracket(const DelayGrid& g, JetCache& center, int i, bool inner) {
  const auto& now = center.at(i);
  const auto qd = g.central(i);
  double s = now.value - dot(qd, now.qd);
  if (inner) s -= dot(qd, center.at(i + g.shift()).qdtau);
  return s;
}

}  // namespace

ConditionReport dbr_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                             const ConditionOptions& opt, std::vector<double>* bracket) {
  check_lambda(problem, lambda);
  const DelayGrid g(problem, traj, opt.kink_tol);
  const Layout L = layout(g, opt);
  const int m = L.shift;
  const double h = g.h();
  const Integrand f = Integrand::augmented(problem, lambda.view());
  Jets jet(g, f);

  const auto count = static_cast<std::size_t>(L.last - L.first + 1);
  TwoRegime tr;
  tr.width = 1;
  tr.inner_q.assign(count, std::vector<double>(1, 0.0));
  tr.outer_q = tr.inner_q;
  tr.inner_ok.assign(count, 0);
  tr.outer_ok.assign(count, 0);
  if (bracket) bracket->assign(count, kNaN);

  double acc = 0.0;
  for (int i = L.first; i <= L.boundary; ++i) {
    require_forward(g, i);
    const auto k = static_cast<std::size_t>(i - L.first);
    if (i > L.first) acc += 0.5 * h * (jet.right.at(i - 1).t + jet.left.at(i).t);
    const double b = energy_bracket(g, jet.center, i, true);
    tr.inner_q[k][0] = b - acc;
    tr.inner_ok[k] = !g.touches_kink({i, i - m, i + m});
    if (bracket) (*bracket)[k] = b;
  }
  acc = 0.0;
  for (int i = L.boundary; i <= L.last; ++i) {
    const auto k = static_cast<std::size_t>(i - L.first);
    if (i > L.boundary) acc += 0.5 * h * (jet.right.at(i - 1).t + jet.left.at(i).t);
    const double b = energy_bracket(g, jet.center, i, false);
    tr.outer_q[k][0] = b - acc;
    tr.outer_ok[k] = !g.touches_kink({i, i - m});
    if (bracket && i > L.boundary) (*bracket)[k] = b;
  }

  ConditionReport rep;
  rep.condition = "dubois_reymond";
  assemble(g, L, tr, rep, "c3", "c4");
  rep.finish(h, opt.tolerance);
  return rep;
}

NoetherProfile noether_constant(const DelayedProblem& problem, const MultiplierVector& lambda, const Trajectory& traj,
                                const Symmetry& sym, const ConditionOptions& opt) {
  check_lambda(problem, lambda);
  if (static_cast<int>(sym.xi.size()) != problem.n)
    throw ValidationError("xi", "expected " + std::to_string(problem.n) + " components");
  const DelayGrid g(problem, traj, opt.kink_tol);
  const Layout L = layout(g, opt);
  const int m = L.shift;
  const Integrand f = Integrand::augmented(problem, lambda.view());
  JetCache center(g, f, Side::center);
  PointData x;

  NoetherProfile out;
  out.boundary = L.boundary;
  double lo[3] = {INFINITY, INFINITY, INFINITY};
  double hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (int i = L.first; i <= L.last; ++i) {
    const bool inner = i <= L.boundary;
    if (inner) require_forward(g, i);
    if (inner ? g.touches_kink({i, i - m, i + m}) : g.touches_kink({i, i - m})) {
      out.excluded.push_back(i);
      continue;
    }
    g.fill(x, i, Side::center);
    const EvalPoint v = x.view();
    const auto& now = center.at(i);
    std::vector<double> momentum = now.qd;
    if (inner) {
      const auto& fwd = center.at(i + m);
      for (std::size_t c = 0; c < momentum.size(); ++c) momentum[c] += fwd.qdtau[c];
    }
    double xi_term = 0.0;
    for (std::size_t c = 0; c < momentum.size(); ++c) xi_term += momentum[c] * evaluate(sym.xi[c], v);
    const double energy = now.value - dot(g.central(i), momentum);
    const double value = -evaluate(sym.gauge, v) + xi_term + energy * evaluate(sym.eta, v);

    out.nodes.push_back(i);
    out.times.push_back(g.time(i));
    out.value.push_back(value);
    out.regime.push_back(inner ? Regime::inner : Regime::outer);
    for (int r : {0, inner ? 1 : 2}) {
      lo[r] = std::min(lo[r], value);
      hi[r] = std::max(hi[r], value);
    }
  }
  auto spread = [&](int r) { return hi[r] >= lo[r] ? hi[r] - lo[r] : 0.0; };
  out.drift = spread(0);
  out.inner_drift = spread(1);
  out.outer_drift = spread(2);
  return out;
}

// ---------------------------------------------------------------------------
// Invariance

namespace {

struct Generator {
  double eta = 0.0;
  double eta_dot = 0.0;
  std::vector<double> xi, xi_dot;
};

/// eta, xi and their total time derivatives along (t, q, qd).
Generator generator_at(const Symmetry& sym, double t, std::span<const double> q, std::span<const double> qd) {
  PointData p;
  p.t = t;
  p.q.assign(q.begin(), q.end());
  const EvalPoint v = p.view();
  auto total = [&](const Expression& e, double& value, double& rate) {
    const DualValue d = gradient(e, v);
    value = d.value();
    rate = 0.0;
    const auto& slots = e.free_slots();
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].kind == SlotKind::t) rate += d.partial(s);
      else rate += d.partial(s) * qd[static_cast<std::size_t>(slots[s].index)];
    }
  };
  Generator gen;
  total(sym.eta, gen.eta, gen.eta_dot);
  gen.xi.resize(sym.xi.size());
  gen.xi_dot.resize(sym.xi.size());
  for (std::size_t c = 0; c < sym.xi.size(); ++c) total(sym.xi[c], gen.xi[c], gen.xi_dot[c]);
  return gen;
}

int node_of(const DelayGrid& g, double t, const char* what) {
  const double r = (t - g.time(0)) / g.h();
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-6) throw ValidationError("subinterval", std::string(what) + " is not a grid node");
  return static_cast<int>(k);
}

}  // namespace

double invariance_residual(const DelayedProblem& problem, const MultiplierVector& lambda, const Symmetry& sym,
                           const Trajectory& traj, std::optional<Subinterval> sub) {
  check_lambda(problem, lambda);
  if (static_cast<int>(sym.xi.size()) != problem.n)
    throw ValidationError("xi", "expected " + std::to_string(problem.n) + " components");
  const DelayGrid g(problem, traj);
  int a = g.first();
  int b = g.last();
  if (sub) {
    a = node_of(g, sub->from, "start");
    b = node_of(g, sub->to, "end");
    if (a < g.first() || b > g.last() || a >= b)
      throw ValidationError("subinterval", "must be a non-empty subinterval of [t1, t2]");
  }
  const Integrand f = Integrand::augmented(problem, lambda.view());
  const int m = g.shift();
  const double h = g.h();

  // Per endpoint sample: untransformed jet plus generator data now and delayed.
  struct Sample {
    PointData x;
    Generator now, delayed;
  };
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(2 * (b - a)));
  for (int c = a; c < b; ++c) {
    for (auto [node, side] : {std::pair{c, Side::right}, std::pair{c + 1, Side::left}}) {
      Sample s;
      g.fill(s.x, node, side);
      s.now = generator_at(sym, s.x.t, s.x.q, s.x.qd);
      s.delayed = generator_at(sym, g.time(node - m), s.x.qtau, s.x.qdtau);
      samples.push_back(std::move(s));
    }
  }

  auto transformed = [&](double s) {
    double total = 0.0;
    PointData z;
    for (const Sample& smp : samples) {
      const PointData& x = smp.x;
      z = x;
      z.t = x.t + s * smp.now.eta;
      const double stretch = 1.0 + s * smp.now.eta_dot;
      const double stretch_tau = 1.0 + s * smp.delayed.eta_dot;
      for (std::size_t c = 0; c < x.q.size(); ++c) {
        z.q[c] = x.q[c] + s * smp.now.xi[c];
        z.qd[c] = (x.qd[c] + s * smp.now.xi_dot[c]) / stretch;
        z.qtau[c] = x.qtau[c] + s * smp.delayed.xi[c];
        z.qdtau[c] = (x.qdtau[c] + s * smp.delayed.xi_dot[c]) / stretch_tau;
      }
      total += 0.5 * h * f.value(z.view()) * stretch;
    }
    return total;
  };

  constexpr double s0 = 1e-5;
  const double rate = (transformed(s0) - transformed(-s0)) / (2.0 * s0);
  PointData x;
  g.fill(x, b, Side::center);
  const double phi_b = evaluate(sym.gauge, x.view());
  g.fill(x, a, Side::center);
  const double phi_a = evaluate(sym.gauge, x.view());
  return rate - (phi_b - phi_a);
}

// ---------------------------------------------------------------------------

AbnormalityResult abnormality_check(const DelayedProblem& problem, const Trajectory& traj,
                                    const ConditionOptions& opt) {
  const DelayGrid g(problem, traj, opt.kink_tol);
  AbnormalityResult out;
  out.abnormal = problem.k > 0;
  for (int j = 0; j < problem.k; ++j) {
    out.rows.push_back(euler_lagrange_report(g, Integrand::single(problem.constraints[static_cast<std::size_t>(j)]), opt,
                                             "constraint_euler_lagrange[" + std::to_string(j) + "]"));
    out.abnormal = out.abnormal && out.rows.back().pass;
  }
  return out;
}

}  // namespace isodelay
