#include <doctest.h>

#include <cmath>

#include "isodelay/builtins.hpp"
#include "isodelay/model.hpp"
#include "support.hpp"

using namespace isodelay;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("load: worked example") {
  const DelayedProblem p = builtin_problem("example33");
  CHECK(p.n == 1);
  CHECK(p.k == 1);
  CHECK(p.tau == 1.0);
  CHECK(p.t1 == 0.0);
  CHECK(p.t2 == 3.0);
  CHECK(p.terminal == std::vector<double>{1.0});
  CHECK(p.history.value(0, -0.5) == 0.5);
  CHECK(p.history.evaluate(0, 0, -0.5, 1) == -1.0);
  CHECK(p.mode == Mode::lagrangian);
}

TEST_CASE("load: validation errors name the field") {
  CHECK(field_of(testing::scalar_problem("qd[0]^2", "q[0]", 5, 0, 3)) == "tau");
  CHECK(field_of(testing::scalar_problem("qd[0]^2", "q[0]", 0, 0, 3)) == "tau");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0]",
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]},"terminal":[0]})") == "g");
  CHECK(field_of(R"({"n":1,"k":2,"tau":1,"t1":0,"t2":3,"L":"qd[0]","g":["q[0]"],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]},"terminal":[0],"levels":[0]})") == "g");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0] +","g":[],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]},"terminal":[0]})") == "L");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0]","g":[],
                     "history":{"pieces":[{"from":-1,"to":-0.5,"coeffs":[0]}]},"terminal":[0]})") == "history");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0]","g":[],
                     "history":{"pieces":[{"from":-1,"to":-0.5,"coeffs":[0]},{"from":-0.4,"to":0,"coeffs":[0]}]},
                     "terminal":[0]})") == "history");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0]","g":["q[0]"],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]},"terminal":[0],"levels":[]})") == "levels");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"qd[0]","g":[],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]},"terminal":[0,1]})") == "terminal");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":3,"t2":0,"L":"qd[0]","g":[],
                     "history":{"pieces":[{"from":2,"to":3,"coeffs":[0]}]},"terminal":[0]})") == "t2");
  CHECK(field_of(R"({"n":1,"mode":"ocp","tau":1,"t1":0,"t2":3,"L":"u[0]","g":[],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]}})") == "phi");
  CHECK(field_of("{not json") == "");
  CHECK(field_of(R"({"n":1,"tau":1,"t1":0,"t2":3,"L":"p[0]","g":[],"mode":"ocp","phi":["u[0]"],
                     "history":{"pieces":[{"from":-1,"to":0,"coeffs":[0]}]}})") == "L");
}

TEST_CASE("load: round trip through problem_to_json") {
  for (const auto& name : builtin_names()) {
    const DelayedProblem a = builtin_problem(name);
    const DelayedProblem b = parse_problem(problem_to_json(a));
    CHECK(b.lagrangian == a.lagrangian);
    CHECK(b.tau == a.tau);
    CHECK(b.levels == a.levels);
    CHECK(problem_to_json(b) == problem_to_json(a));
  }
}

TEST_CASE("load: multi-component and ocp problems") {
  const DelayedProblem p = parse_problem(R"({
    "n": 2, "mode": "ocp", "m": 1, "tau": 0.5, "t1": 0, "t2": 2,
    "L": "u[0]^2 + q[1]^2", "g": [], "phi": ["q[1]", "u[0] - qtau[0]"],
    "history": {"pieces": [{"from": -0.5, "to": 0, "coeffs": [[1], [0, 2]]}]}})");
  CHECK(p.n == 2);
  CHECK(p.m == 1);
  CHECK(p.dynamics.size() == 2);
  CHECK(p.terminal.empty());
  CHECK(p.history.value(1, -0.25) == -0.5);
}

TEST_CASE("multiplier and symmetry validation") {
  CHECK_THROWS_AS(MultiplierVector({1.0, NAN}), ValidationError);
  CHECK_NOTHROW(MultiplierVector({1.0, 2.0}));
  const DelayedProblem p = builtin_problem("example33");
  CHECK_THROWS_AS(Symmetry::parse("qd[0]", {"0"}, "0", p), ValidationError);
  CHECK_THROWS_AS(Symmetry::parse("1", {"qtau[0]"}, "0", p), ValidationError);
  CHECK_THROWS_AS(Symmetry::parse("1", {"0", "0"}, "0", p), ValidationError);
  const Symmetry s = Symmetry::parse("t", {"q[0]"}, "qd[0]*qdtau[0]", p);
  CHECK(s.gauge.depends_on({SlotKind::qdtau, 0}));
}

TEST_CASE("commensurability") {
  CHECK(commensurate_shift(1.0, 0.01) == 100);
  CHECK(commensurate_shift(0.1, 0.1 / 3) == 3);
  CHECK_THROWS_AS(commensurate_shift(0.1, 0.03), ValidationError);
  CHECK_THROWS_AS(commensurate_shift(0.01, 0.1), ValidationError);
}

TEST_CASE("derivative: worked example extremal") {
  const Trajectory tr = *builtin_extremal("example33", 300);
  const int per_unit = 100;
  const NodeDerivative mid = derivative(tr, per_unit + 50);  // t = 0.5
  REQUIRE_FALSE(mid.kink);
  CHECK(mid.value[0] == doctest::Approx(1.0));
  const NodeDerivative corner = derivative(tr, 2 * per_unit);  // t = 1
  CHECK(corner.kink);
  CHECK(corner.left[0] == doctest::Approx(1.0));
  CHECK(corner.right[0] == doctest::Approx(-1.0));
  CHECK(corner.value.empty());

  Trajectory flat = tr;
  std::fill(flat.q.begin(), flat.q.end(), 2.0);
  flat.kink_set.clear();
  for (int i = 1; i + 1 < flat.nodes(); ++i) CHECK(derivative(flat, i).value[0] == 0.0);
}

TEST_CASE("derivative: one-sided policies") {
  Trajectory tr;
  tr.h = 0.5;
  tr.q = {0.0, 1.0, 3.0};
  tr.policy = DerivativePolicy::one_sided_left;
  CHECK(derivative(tr, 1).left[0] == 2.0);
  CHECK(derivative(tr, 1).right[0] == 4.0);
}

TEST_CASE("kink detection ignores smooth curvature") {
  const DelayedProblem p = builtin_problem("parabola");
  for (int N : {40, 200, 400}) {
    const Trajectory tr = *builtin_extremal("parabola", N);
    const DelayGrid g(p, tr);
    CHECK(g.kinks().empty());
  }
  const DelayGrid g(builtin_problem("example33"), *builtin_extremal("example33", 300));
  CHECK(g.kinks() == std::vector<int>{100, 200, 300});

  const std::vector<double> jumps = {0, 1e-3, 1e-3, 0.5, 1e-3, 1e-3, 0};
  const std::vector<double> scales(jumps.size(), 1.0);
  CHECK(detect_kinks(jumps, scales, 1e-6) == std::vector<int>{3});
  const std::vector<double> edge = {0, 1e-3, 1e-3, 1e-3, 0};
  CHECK(detect_kinks(edge, std::vector<double>(5, 1.0), 1e-6).empty());
}

TEST_CASE("grid: delayed value is an exact index shift") {
  const DelayedProblem p = builtin_problem("delayed");
  std::mt19937 rng(5);
  const Trajectory tr = testing::random_smooth(p, 80, rng);
  const DelayGrid g(p, tr);
  REQUIRE(g.shift() == 20);
  PointData x;
  for (int i = g.first(); i <= g.last(); ++i) {
    g.fill(x, i, Side::center);
    CHECK(x.qtau[0] == tr.q[static_cast<std::size_t>(i - 20)]);
    CHECK(x.q[0] == tr.q[static_cast<std::size_t>(i)]);
  }
  // history derivatives come from the polynomial, not from differences
  for (int i = 0; i < g.first(); ++i) CHECK(g.central(i)[0] == 1.0);
}

TEST_CASE("grid: trajectory checks") {
  const DelayedProblem p = builtin_problem("parabola");
  Trajectory tr = *builtin_extremal("parabola", 100);
  tr.q[3] += 0.01;
  CHECK_THROWS_AS(DelayGrid(p, tr), ValidationError);
  Trajectory short_tr = *builtin_extremal("parabola", 100);
  short_tr.q.pop_back();
  CHECK_THROWS_AS(DelayGrid(p, short_tr), ValidationError);
  Trajectory coarse = *builtin_extremal("parabola", 100);
  coarse.h = 0.03;
  CHECK_THROWS(DelayGrid(p, coarse));
}

TEST_CASE("csv round trip and errors") {
  Trajectory tr = *builtin_extremal("example33", 30);
  const std::string text = trajectory_to_csv(tr);
  CHECK(text.rfind("t,q0\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  const Trajectory back = read_trajectory_csv(text, 1);
  CHECK(back.q == tr.q);
  CHECK(back.h == doctest::Approx(tr.h).epsilon(1e-12));
  CHECK(back.t_start == tr.t_start);

  Trajectory ocp = tr;
  ocp.m = 1;
  ocp.u.assign(ocp.q.size(), 0.25);
  ocp.p.assign(ocp.q.size(), -1.0);
  const Trajectory ocp_back = read_trajectory_csv(trajectory_to_csv(ocp), 1, 1);
  CHECK(ocp_back.u == ocp.u);
  CHECK(ocp_back.p == ocp.p);

  CHECK_THROWS_AS(read_trajectory_csv("t,q0\n0,1\n0.1,2\n0.3,3\n", 1), ValidationError);
  CHECK_THROWS_AS(read_trajectory_csv("x,q0\n0,1\n1,2\n", 1), ValidationError);
  CHECK_THROWS_AS(read_trajectory_csv("t,q0\n0,1\n1,abc\n", 1), ValidationError);
  CHECK_THROWS_AS(read_trajectory_csv("t,q0\n0,1\n", 1), ValidationError);
}

TEST_CASE("functional values: spec examples") {
  const DelayedProblem ex = builtin_problem("example33");
  const FunctionalValues v = functional_value(ex, *builtin_extremal("example33", 300));
  CHECK(std::abs(v.objective) <= 1e-12);
  CHECK(std::abs(v.constraints.at(0)) <= 1e-12);

  const DelayedProblem ones = parse_problem(testing::scalar_problem("1", "1", 1, 0, 3));
  const FunctionalValues c = functional_value(ones, sample_trajectory(ones, 30, [](int, double t) { return t; }));
  CHECK(c.objective == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(c.constraints[0] == doctest::Approx(3.0).epsilon(1e-14));

  const DelayedProblem unit = parse_problem(testing::scalar_problem("qd[0]^2", "", 0.5, 0, 1));
  const FunctionalValues j = functional_value(unit, sample_trajectory(unit, 10, [](int, double t) { return t; }));
  CHECK(j.objective == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(j.constraints.empty());
}

TEST_CASE("quadrature converges at second order") {
  // integral of q^3 with q = sin t on [0, 2] plus a delayed term
  const DelayedProblem p = parse_problem(testing::scalar_problem("q[0]^3 + q[0]*qtau[0]", "", 0.5, 0, 2, 1.0));
  auto exact_fn = [] {
    // history q = t on [-0.5, 0]; q = sin t on [0, 2]
    // int_0^2 sin^3 = [cos^3/3 - cos]_0^2; int_0^0.5 sin(t)(t-0.5) + int_0.5^2 sin(t) sin(t-0.5)
    const auto F3 = [](double t) { return std::pow(std::cos(t), 3) / 3 - std::cos(t); };
    const double a = F3(2) - F3(0);
    // int sin(t)(t - 0.5) dt = sin t - t cos t + 0.5 cos t
    const auto G = [](double t) { return std::sin(t) - t * std::cos(t) + 0.5 * std::cos(t); };
    const double b = G(0.5) - G(0);
    // sin t sin(t - c) = (cos c - cos(2t - c)) / 2
    const double c = 0.5;
    const auto H = [c](double t) { return 0.5 * (std::cos(c) * t - std::sin(2 * t - c) / 2); };
    return a + b + (H(2) - H(0.5));
  };
  const double exact = exact_fn();
  double prev = 0;
  for (int N : {20, 40, 80, 160}) {
    const Trajectory tr = sample_trajectory(p, N, [](int, double t) { return std::sin(t); });
    const double err = std::abs(functional_value(p, tr).objective - exact);
    if (prev > 0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
}
