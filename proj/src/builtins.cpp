#include "isodelay/builtins.hpp"

#include <cmath>

namespace isodelay {

namespace {

struct Builtin {
  const char* name;
  const char* json;
};

// Cubic delayed Lagrangian with a quadratic delayed constraint; its known
// extremal is piecewise linear with corners at t = 0, 1, 2.
constexpr const char* kExample33 = R"({
  "name": "example33",
  "n": 1, "k": 1,
  "tau": 1, "t1": 0, "t2": 3,
  "L": "(qd[0] + qdtau[0])^3",
  "g": ["(qd[0] + qdtau[0])^2"],
  "history": {"pieces": [{"from": -1, "to": 0, "coeffs": [0, -1]}]},
  "terminal": [1],
  "levels": [0]
})";

// Delay-inert classical isoperimetric problem: minimise the integral of
// qd^2 with unit area under q. Extremal 6t(1 - t), multiplier 24.
constexpr const char* kParabola = R"({
  "name": "parabola",
  "n": 1, "k": 1,
  "tau": 0.1, "t1": 0, "t2": 1,
  "L": "qd[0]^2",
  "g": ["q[0]"],
  "history": {"pieces": [{"from": -0.1, "to": 0, "coeffs": [0, 6, -6]}]},
  "terminal": [0],
  "levels": [1]
})";

// Explicitly time-dependent Lagrangian; time translation is not a symmetry.
constexpr const char* kNonautonomous = R"({
  "name": "nonautonomous",
  "n": 1, "k": 1,
  "tau": 0.25, "t1": 0, "t2": 1,
  "L": "t * qd[0]^2",
  "g": ["q[0]"],
  "history": {"pieces": [{"from": -0.25, "to": 0, "coeffs": [0, 1]}]},
  "terminal": [1],
  "levels": [0.5]
})";

// Genuinely delayed smooth problem with a non-quadratic velocity term.
constexpr const char* kDelayed = R"({
  "name": "delayed",
  "n": 1, "k": 1,
  "tau": 0.25, "t1": 0, "t2": 1,
  "L": "qd[0]^4 / 4 + qd[0]^2 / 2 + qd[0] * qdtau[0] / 4 + q[0] * qtau[0]",
  "g": ["q[0]"],
  "history": {"pieces": [{"from": -0.25, "to": 0, "coeffs": [0, 1]}]},
  "terminal": [0],
  "levels": [0.2]
})";

constexpr Builtin kBuiltins[] = {
    {"example33", kExample33},
    {"parabola", kParabola},
    {"nonautonomous", kNonautonomous},
    {"delayed", kDelayed},
};

}  // namespace

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltins) out.emplace_back(b.name);
  return out;
}

std::string builtin_problem_json(std::string_view name) {
  for (const auto& b : kBuiltins)
    if (name == b.name) return b.json;
  std::string known;
  for (const auto& b : kBuiltins) known += std::string(known.empty() ? "" : ", ") + b.name;
  throw ValidationError("builtin", "unknown built-in '" + std::string(name) + "' (known: " + known + ")");
}

DelayedProblem builtin_problem(std::string_view name) { return parse_problem(builtin_problem_json(name)); }

std::optional<Trajectory> builtin_extremal(std::string_view name, int intervals) {
  const DelayedProblem p = builtin_problem(name);
  if (name == "example33") {
    if (intervals % 3 != 0) throw ValidationError("n", "example33 extremal needs N divisible by 3");
    Trajectory traj = sample_trajectory(p, intervals, [](int, double t) {
      if (t <= 1.0) return t;
      if (t <= 2.0) return 2.0 - t;
      return t - 2.0;
    });
    const int third = intervals / 3;
    traj.kink_set = {third, 2 * third, 3 * third};
    return traj;
  }
  if (name == "parabola") return sample_trajectory(p, intervals, [](int, double t) { return 6.0 * t * (1.0 - t); });
  return std::nullopt;
}

std::optional<std::vector<double>> builtin_multiplier(std::string_view name) {
  if (name == "parabola") return std::vector<double>{24.0};
  return std::nullopt;
}

}  // namespace isodelay
