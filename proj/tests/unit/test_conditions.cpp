#include <doctest.h>

#include <cmath>

#include "isodelay/builtins.hpp"
#include "isodelay/conditions.hpp"
#include "isodelay/solver.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace isodelay;

namespace {

DelayedProblem problem(const std::string& L, const std::string& g, double tau, double t1, double t2,
                       double slope = 1.0) {
  return parse_problem(testing::scalar_problem(L, g, tau, t1, t2, slope));
}

MultiplierVector lam(double v) { return MultiplierVector({v}); }

double sup_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST_CASE("augmented value: spec examples") {
  const DelayedProblem ex = builtin_problem("example33");
  PointData x;
  x.q = {0};
  x.qd = {1};
  x.qtau = {0};
  x.qdtau = {-1};
  CHECK(augmented_value(ex, lam(2), x.view()) == 0.0);
  x.qdtau = {0.5};
  CHECK(augmented_value(ex, lam(0), x.view()) == evaluate(ex.lagrangian, x.view()));
  const DelayedProblem ones = problem("1", "1", 1, 0, 3);
  CHECK(augmented_value(ones, lam(1), x.view()) == 0.0);
  CHECK_THROWS_AS(augmented_value(ones, MultiplierVector({1.0, 2.0}), x.view()), ValidationError);
}

TEST_CASE("worked example: every condition vanishes") {
  const DelayedProblem ex = builtin_problem("example33");
  const Trajectory tr = *builtin_extremal("example33", 300);
  for (double l : {-1.0, 0.0, 2.0}) {
    CAPTURE(l);
    ConditionOptions opt;
    opt.tolerance = 1e-12;
    const ConditionReport el = el_residual(ex, lam(l), tr, opt);
    CHECK(el.pass);
    CHECK(el.sup_norm <= 1e-12);
    for (const auto& c : el.constants) CHECK(std::abs(c.value[0]) <= 1e-12);
    CHECK(el.constants[0].name == "c1");
    CHECK(el.excluded.size() > 0);
    for (int i : el.excluded) CHECK((i % 100 == 0 || (i + 1) % 100 == 0 || (i - 1) % 100 == 0));

    const ConditionReport cd = cdur_residual(ex, lam(l), tr, opt);
    CHECK(cd.pass);
    REQUIRE(cd.windows.size() == 2);
    CHECK(cd.windows[0].to == doctest::Approx(2.0));
    CHECK(cd.windows[1].to == doctest::Approx(0.0));

    const ConditionReport db = dbr_residual(ex, lam(l), tr, opt);
    CHECK(db.pass);
    for (const auto& c : db.constants) CHECK(std::abs(c.value[0]) <= 1e-12);

    const NoetherProfile np = noether_constant(ex, lam(l), tr, Symmetry::time_translation(1), opt);
    CHECK(np.drift <= 1e-12);
    CHECK(np.boundary == 300);
  }
}

TEST_CASE("el: free particle and classical parabola") {
  const DelayedProblem free = problem("qd[0]^2/2", "q[0]", 0.3, 0, 1.5, 2.0);
  const Trajectory line = sample_trajectory(free, 30, [](int, double t) { return 2 * t; });
  CHECK(el_residual(free, lam(0), line).sup_norm <= 1e-12);

  for (double l : {1.0, 0.5}) {
    DelayedProblem p2 = builtin_problem("parabola");
    p2.history = History({{-0.1, 0.0, {{0.0, 6 * l, -6 * l}}}}, 1);
    p2.levels = {l};
    const Trajectory tr = sample_trajectory(p2, 100, [l](int, double t) { return 6 * l * t * (1 - t); });
    const ConditionReport r = el_residual(p2, lam(24 * l), tr);
    CHECK(r.sup_norm <= 1e-10);
    CHECK(el_residual(p2, lam(24 * l + 1), tr).sup_norm > 1e-3);
  }
}

TEST_CASE("el: half-weight Lagrangian gives half the multiplier") {
  DelayedProblem p = parse_problem(testing::scalar_problem("qd[0]^2/2", "q[0]", 0.1, 0, 1, 6, 0, 1));
  p.history = History({{-0.1, 0.0, {{0.0, 6.0, -6.0}}}}, 1);
  const Trajectory tr = sample_trajectory(p, 100, [](int, double t) { return 6 * t * (1 - t); });
  CHECK(el_residual(p, lam(12), tr).sup_norm <= 1e-10);
  CHECK(el_residual(p, lam(24), tr).sup_norm > 1e-2);
}

TEST_CASE("cdur: spec examples") {
  const DelayedProblem inert = problem("qd[0]^2 + q[0]", "q[0]^2", 0.5, 0, 2);
  std::mt19937 rng(1);
  const Trajectory any = testing::random_smooth(inert, 40, rng);
  const ConditionReport r = cdur_residual(inert, lam(0.7), any);
  CHECK(r.sup_norm == 0.0);

  // L = qdtau * q with q = t^2 everywhere: residual = 2 q(t + tau)
  DelayedProblem p = problem("qdtau[0]*q[0]", "q[0]", 0.5, 0, 2);
  p.history = History({{-0.5, 0.0, {{0.0, 0.0, 1.0}}}}, 1);
  const Trajectory sq = sample_trajectory(p, 40, [](int, double t) { return t * t; });
  const ConditionReport c = cdur_residual(p, lam(0), sq);
  REQUIRE(c.nodes.size() > 10);
  for (std::size_t k = 0; k < c.nodes.size(); ++k) {
    const double t = c.times[k];
    CHECK(c.residual[k] == doctest::Approx(2 * (t + 0.5) * (t + 0.5)).epsilon(1e-9));
  }
  CHECK_FALSE(c.pass);
  CHECK(c.regime.front() == Regime::history);
  CHECK(c.regime.back() == Regime::inner);
}

TEST_CASE("dbr: spec examples") {
  const DelayedProblem free = problem("qd[0]^2/2", "q[0]", 0.3, 0, 1.5, 2.0);
  const Trajectory line = sample_trajectory(free, 30, [](int, double t) { return 2 * t; });
  const ConditionReport r = dbr_residual(free, lam(0), line);
  CHECK(r.sup_norm <= 1e-12);
  CHECK(r.constants[0].value[0] == doctest::Approx(-2.0));
  CHECK(r.constants[1].value[0] == doctest::Approx(-2.0));

  const DelayedProblem tl = problem("t*qd[0]", "q[0]", 0.3, 0, 1.5, 0.0);
  const Trajectory flat = sample_trajectory(tl, 30, [](int, double) { return 0.0; });
  CHECK(dbr_residual(tl, lam(0), flat).sup_norm == 0.0);
}

TEST_CASE("noether: spec examples") {
  const DelayedProblem free = problem("qd[0]^2/2", "", 0.3, 0, 1.5, 2.0);
  const Trajectory line = sample_trajectory(free, 30, [](int, double t) { return 2 * t; });
  const NoetherProfile np = noether_constant(free, MultiplierVector(), line, Symmetry::time_translation(1));
  CHECK(np.drift <= 1e-12);
  CHECK(np.value.front() == doctest::Approx(-2.0));

  DelayedProblem sq = problem("qd[0]^2/2", "", 0.3, 0, 1.5);
  sq.history = History({{-0.3, 0.0, {{0.0, 0.0, 1.0}}}}, 1);
  const Trajectory curve = sample_trajectory(sq, 30, [](int, double t) { return t * t; });
  const NoetherProfile bad = noether_constant(sq, MultiplierVector(), curve, Symmetry::time_translation(1));
  CHECK(bad.drift > 1.0);
  for (std::size_t k = 1; k + 1 < bad.nodes.size(); ++k)
    CHECK(bad.value[k] == doctest::Approx(-2 * bad.times[k] * bad.times[k]).epsilon(1e-9));
}

TEST_CASE("invariance: spec examples") {
  const DelayedProblem ex = builtin_problem("example33");
  std::mt19937 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const Trajectory tr = testing::random_smooth(ex, 60, rng, 0.5, false);
    for (auto sub : {std::optional<Subinterval>{}, std::optional<Subinterval>{{0.5, 2.5}}})
      CHECK(std::abs(invariance_residual(ex, lam(2), Symmetry::time_translation(1), tr, sub)) <= 1e-8);
    Symmetry none = Symmetry::parse("0", {"0"}, "0", ex);
    CHECK(invariance_residual(ex, lam(2), none, tr) == 0.0);
  }

  const DelayedProblem tq = problem("t*qd[0]^2", "q[0]", 0.25, 0, 1, 1.0);
  const Trajectory line = sample_trajectory(tq, 40, [](int, double t) { return t + 0.5 * t * t; });
  const double r = invariance_residual(tq, lam(0), Symmetry::time_translation(1), line);
  // d/ds of the shifted integral is the integral of qd^2 (trapezoid on cells)
  const double expected = 1.0 + 1.0 + 1.0 / 3.0;
  CHECK(std::abs(r) == doctest::Approx(expected).epsilon(1e-3));

  // gauge only: the residual is -(Phi(t2) - Phi(t1))
  const Symmetry gauge = Symmetry::parse("0", {"0"}, "q[0]^2", ex);
  const Trajectory tr = *builtin_extremal("example33", 30);
  CHECK(invariance_residual(ex, lam(0), gauge, tr) == doctest::Approx(-1.0));
  const Symmetry periodic = Symmetry::parse("0", {"0"}, "qd[0]", ex);
  CHECK(std::abs(invariance_residual(ex, lam(0), periodic, tr)) <= 1e-12);

  CHECK_THROWS_AS(invariance_residual(ex, lam(0), gauge, tr, Subinterval{0.05, 1.0}), ValidationError);
  CHECK_THROWS_AS(invariance_residual(ex, lam(0), gauge, tr, Subinterval{2.0, 1.0}), ValidationError);
}

TEST_CASE("abnormality: spec examples") {
  const AbnormalityResult ex =
      abnormality_check(builtin_problem("example33"), *builtin_extremal("example33", 300));
  CHECK(ex.abnormal);
  REQUIRE(ex.rows.size() == 1);
  CHECK(ex.rows[0].condition == "constraint_euler_lagrange[0]");

  const DelayedProblem g_q = problem("qd[0]^2", "q[0]", 0.3, 0, 1.5, 2.0);
  const Trajectory line = sample_trajectory(g_q, 30, [](int, double t) { return 2 * t; });
  CHECK_FALSE(abnormality_check(g_q, line).abnormal);

  const DelayedProblem none = problem("qd[0]^2", "", 0.3, 0, 1.5, 2.0);
  CHECK_FALSE(abnormality_check(none, line).abnormal);
}

TEST_CASE("lambda = 0 agrees with the hand-coded reference") {
  struct Case {
    const char* builtin;
    testing::ScalarLagrangian L;
  };
  for (const Case& cs : {Case{"delayed", testing::delayed_lagrangian()}, Case{"example33", testing::cubic_lagrangian()}}) {
    const DelayedProblem p = builtin_problem(cs.builtin);
    std::mt19937 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
      const Trajectory tr = testing::random_smooth(p, 60, rng);
      const DelayGrid g(p, tr);
      const auto ref = testing::reference_conditions(g, cs.L);
      const ConditionReport el = el_residual(p, lam(0), tr);
      std::vector<double> bracket;
      const ConditionReport db = dbr_residual(p, lam(0), tr, {}, &bracket);
      REQUIRE(el.nodes == ref.nodes);
      REQUIRE(db.nodes == ref.nodes);
      for (std::size_t k = 0; k < ref.nodes.size(); ++k) {
        CHECK(std::abs(el.residual[k] - ref.el[k]) <= 1e-14 * ref.scale);
        CHECK(std::abs(db.residual[k] - ref.dbr[k]) <= 1e-14 * ref.scale);
      }
      const Symmetry sym = Symmetry::parse("1 + 0.5*q[0]", {"t"}, "0", p);
      const NoetherProfile np = noether_constant(p, lam(0), tr, sym);
      for (std::size_t k = 0; k < np.nodes.size(); ++k) {
        const int i = np.nodes[k] - g.first();
        const double t = np.times[k];
        const double q = g.q(np.nodes[k])[0];
        const double want = ref.momentum[i] * t + ref.energy[i] * (1 + 0.5 * q);
        CHECK(std::abs(np.value[k] - want) <= 1e-14 * ref.scale);
      }
    }
  }
}

TEST_CASE("noether with time translation equals the DuBois-Reymond bracket") {
  for (const auto& name : builtin_names()) {
    CAPTURE(name);
    const DelayedProblem p = builtin_problem(name);
    const int N = name == "example33" ? 90 : 80;
    std::mt19937 rng(8);
    std::vector<Trajectory> trajs{testing::random_smooth(p, N, rng)};
    if (auto ex = builtin_extremal(name, N)) trajs.push_back(*ex);
    for (const Trajectory& tr : trajs) {
      const MultiplierVector l = lam(1.3);
      std::vector<double> bracket;
      dbr_residual(p, l, tr, {}, &bracket);
      const NoetherProfile np = noether_constant(p, l, tr, Symmetry::time_translation(1));
      const int first = commensurate_shift(p.tau, tr.h);
      double scale = 1.0;
      for (double v : bracket)
        if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
      REQUIRE_FALSE(np.nodes.empty());
      for (std::size_t k = 0; k < np.nodes.size(); ++k)
        CHECK(std::abs(np.value[k] - bracket[static_cast<std::size_t>(np.nodes[k] - first)]) <= 1e-14 * scale);
    }
  }
}

TEST_CASE("residuals are affine in lambda") {
  const DelayedProblem p = builtin_problem("delayed");
  std::mt19937 rng(3);
  const Trajectory tr = testing::random_smooth(p, 80, rng);
  std::uniform_real_distribution<double> d(-5, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = d(rng), b = d(rng);
    const double mid = 0.5 * (a + b);
    auto consts = [&](double l) {
      std::vector<double> out;
      for (const auto& c : el_residual(p, lam(l), tr).constants) out.push_back(c.value[0]);
      for (const auto& c : dbr_residual(p, lam(l), tr).constants) out.push_back(c.value[0]);
      const auto np = noether_constant(p, lam(l), tr, Symmetry::time_translation(1));
      out.insert(out.end(), np.value.begin(), np.value.end());
      return out;
    };
    const auto ca = consts(a), cb = consts(b), cm = consts(mid);
    for (std::size_t k = 0; k < cm.size(); ++k)
      CHECK(cm[k] == doctest::Approx(0.5 * (ca[k] + cb[k])).epsilon(1e-12).scale(1.0));
    // the signed integrated EL quantity is affine, so |r(mid)| <= (|r(a)| + |r(b)|) / 2
    const auto ra = el_residual(p, lam(a), tr), rb = el_residual(p, lam(b), tr), rm = el_residual(p, lam(mid), tr);
    for (std::size_t k = 0; k < rm.residual.size(); ++k)
      CHECK(rm.residual[k] <= 0.5 * (ra.residual[k] + rb.residual[k]) + 1e-12);
  }
}

TEST_CASE("regime boundary misplacement is detected") {
  const DelayedProblem p = builtin_problem("delayed");
  SolveSettings s;
  s.intervals = 160;
  const SolveResult sol = solve_isoperimetric(p, s);
  REQUIRE(sol.converged);
  const ConditionReport base = el_residual(p, sol.lambda, sol.trajectory);
  ConditionOptions early;
  early.boundary_shift = -1;
  const ConditionReport swapped = el_residual(p, sol.lambda, sol.trajectory, early);
  CHECK(swapped.sup_norm > 100 * base.sup_norm);
  ConditionOptions late;
  late.boundary_shift = 1;
  CHECK_THROWS_AS(el_residual(p, sol.lambda, sol.trajectory, late), std::logic_error);
  CHECK_THROWS_AS(dbr_residual(p, sol.lambda, sol.trajectory, late), std::logic_error);
  CHECK_THROWS_AS(cdur_residual(p, sol.lambda, sol.trajectory, late), std::logic_error);
}

TEST_CASE("report invariants") {
  const DelayedProblem p = builtin_problem("delayed");
  std::mt19937 rng(4);
  const Trajectory tr = testing::random_smooth(p, 40, rng);
  const ConditionReport r = el_residual(p, lam(0.5), tr);
  const DelayGrid g(p, tr);
  double sup = 0.0;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    sup = std::max(sup, r.residual[k]);
    CHECK(r.regime[k] == (r.nodes[k] <= g.boundary() ? Regime::inner : Regime::outer));
  }
  CHECK(r.sup_norm == sup);
  CHECK(r.l2_norm <= sup * std::sqrt(g.h() * r.nodes.size()) + 1e-15);
  CHECK(sup_abs(r.residual) == r.sup_norm);
  CHECK(r.differentiated.size() == r.nodes.size());
  CHECK_THROWS_AS(el_residual(p, MultiplierVector(), tr), ValidationError);
}
