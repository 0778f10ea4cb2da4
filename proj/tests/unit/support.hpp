#pragma once

#include <cmath>
#include <random>
#include <string>

#include "isodelay/model.hpp"

namespace testing {

/// Scalar Lagrangian-mode problem file with a linear history.
inline std::string scalar_problem(const std::string& L, const std::string& g, double tau, double t1, double t2,
                                  double slope = 1.0, double terminal = 0.0, double level = 0.0) {
  const std::string gs = g.empty() ? "[]" : "[\"" + g + "\"]";
  const std::string lv = g.empty() ? "[]" : "[" + std::to_string(level) + "]";
  return "{\"n\": 1, \"tau\": " + std::to_string(tau) + ", \"t1\": " + std::to_string(t1) + ", \"t2\": " +
         std::to_string(t2) + ", \"L\": \"" + L + "\", \"g\": " + gs +
         ", \"history\": {\"pieces\": [{\"from\": " + std::to_string(t1 - tau) + ", \"to\": " + std::to_string(t1) +
         ", \"coeffs\": [0, " + std::to_string(slope) + "]}]}, \"terminal\": [" + std::to_string(terminal) +
         "], \"levels\": " + lv + "}";
}

/// History sampled exactly, then delta(t1) + random smooth bump on [t1, t2].
/// With `join_smoothly` the slope at t1 matches the history, so t1 is not a
/// kink.
inline isodelay::Trajectory random_smooth(const isodelay::DelayedProblem& p, int intervals, std::mt19937& rng,
                                          double amplitude = 0.3, bool join_smoothly = true) {
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  const double a1 = d(rng), a2 = d(rng), a3 = d(rng), free_slope = d(rng);
  const double len = p.t2 - p.t1;
  return isodelay::sample_trajectory(p, intervals, [&](int c, double t) {
    const double s = (t - p.t1) / len;
    const double base = p.history.value(c, p.t1);
    const double hist_slope = p.history.evaluate(p.history.piece_at(p.t1, false), c, p.t1, 1);
    const double slope = join_smoothly ? hist_slope * len - M_PI * (a1 + 2 * a2) : free_slope;
    return base + slope * s + a1 * std::sin(M_PI * s) + a2 * std::sin(2 * M_PI * s) + a3 * s * s * (1 - s);
  });
}

}  // namespace testing
