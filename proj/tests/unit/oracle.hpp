#pragma once

// Hand-coded reference for the multiplier-free conditions of a scalar
// delayed Lagrangian. Partials are written out by hand; only the grid
// (slopes and node derivatives) is shared with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "isodelay/model.hpp"

namespace testing {

/// L and its partials in (t, q, qd, qtau, qdtau), scalar state.
struct ScalarLagrangian {
  using Fn = std::function<double(double, double, double, double, double)>;
  Fn value, d_t, d_q, d_qd, d_qtau, d_qdtau;
};

/// L = qd^4/4 + qd^2/2 + qd*qdtau/4 + q*qtau
inline ScalarLagrangian delayed_lagrangian() {
  ScalarLagrangian L;
  L.value = [](double, double q, double v, double qt, double vt) {
    return v * v * v * v / 4 + v * v / 2 + v * vt / 4 + q * qt;
  };
  L.d_t = [](double, double, double, double, double) { return 0.0; };
  L.d_q = [](double, double, double, double qt, double) { return qt; };
  L.d_qd = [](double, double, double v, double, double vt) { return v * v * v + v + vt / 4; };
  L.d_qtau = [](double, double q, double, double, double) { return q; };
  L.d_qdtau = [](double, double, double v, double, double) { return v / 4; };
  return L;
}

/// L = (qd + qdtau)^3
inline ScalarLagrangian cubic_lagrangian() {
  ScalarLagrangian L;
  L.value = [](double, double, double v, double, double vt) { return (v + vt) * (v + vt) * (v + vt); };
  L.d_t = [](double, double, double, double, double) { return 0.0; };
  L.d_q = [](double, double, double, double, double) { return 0.0; };
  L.d_qd = [](double, double, double v, double, double vt) { return 3 * (v + vt) * (v + vt); };
  L.d_qtau = [](double, double, double, double, double) { return 0.0; };
  L.d_qdtau = L.d_qd;
  return L;
}

struct ReferenceConditions {
  std::vector<int> nodes;  ///< reported nodes of [t1, t2]
  std::vector<double> el, dbr;
  std::vector<double> energy;  ///< L - qd * momentum, every node of [t1, t2]
  std::vector<double> momentum;
  double scale = 1.0;  ///< largest bracket magnitude, sets the rounding floor
};

/// Integrated EL and DuBois-Reymond deviations (from the regime means) and
/// the momentum/energy pair at every node.
inline ReferenceConditions reference_conditions(const isodelay::DelayGrid& g, const ScalarLagrangian& L) {
  using isodelay::Side;
  const int a = g.first(), b = g.boundary(), e = g.last(), m = g.shift();
  const double h = g.h();
  auto eval = [&](const ScalarLagrangian::Fn& f, int i, Side side) {
    const double v = g.slope(i, side)[0];
    const double vt = g.slope(i - m, side)[0];
    return f(g.time(i), g.q(i)[0], v, g.q(i - m)[0], vt);
  };
  // momentum and energy at node i, with or without the advanced term
  auto momentum = [&](int i, bool inner) {
    double p = eval(L.d_qd, i, Side::center);
    if (inner) p += eval(L.d_qdtau, i + m, Side::center);
    return p;
  };
  auto energy = [&](int i, bool inner) {
    return eval(L.value, i, Side::center) - g.central(i)[0] * momentum(i, inner);
  };
  auto ok = [&](int i, bool inner) {
    return inner ? !g.touches_kink({i, i - m, i + m}) : !g.touches_kink({i, i - m});
  };

  const int count = e - a + 1;
  std::vector<double> el_in(count, NAN), el_out(count, NAN), dbr_in(count, NAN), dbr_out(count, NAN);
  double force = 0.0, power = 0.0;
  for (int i = a; i <= b; ++i) {
    if (i > a) {
      const int c = i - 1;
      force += 0.5 * h *
               (eval(L.d_q, c, Side::right) + eval(L.d_qtau, c + m, Side::right) + eval(L.d_q, c + 1, Side::left) +
                eval(L.d_qtau, c + 1 + m, Side::left));
      power += 0.5 * h * (eval(L.d_t, c, Side::right) + eval(L.d_t, c + 1, Side::left));
    }
    el_in[i - a] = momentum(i, true) - force;
    dbr_in[i - a] = energy(i, true) - power;
  }
  force = power = 0.0;
  for (int i = b; i <= e; ++i) {
    if (i > b) {
      force += 0.5 * h * (eval(L.d_q, i - 1, Side::right) + eval(L.d_q, i, Side::left));
      power += 0.5 * h * (eval(L.d_t, i - 1, Side::right) + eval(L.d_t, i, Side::left));
    }
    el_out[i - a] = momentum(i, false) - force;
    dbr_out[i - a] = energy(i, false) - power;
  }

  auto mean = [&](const std::vector<double>& v, int lo, int hi, bool inner) {
    double s = 0.0;
    int k = 0;
    for (int i = lo; i <= hi; ++i)
      if (ok(i, inner)) {
        s += v[i - a];
        ++k;
      }
    return s / k;
  };
  const double el_c1 = mean(el_in, a, b, true), el_c2 = mean(el_out, b, e, false);
  const double db_c1 = mean(dbr_in, a, b, true), db_c2 = mean(dbr_out, b, e, false);

  ReferenceConditions out;
  for (const auto* v : {&el_in, &el_out, &dbr_in, &dbr_out})
    for (double x : *v)
      if (std::isfinite(x)) out.scale = std::max(out.scale, std::abs(x));
  for (int i = a; i <= e; ++i) {
    const bool inner = i <= b;
    out.momentum.push_back(momentum(i, inner));
    out.energy.push_back(energy(i, inner));
    double r_el = -1.0, r_db = -1.0;
    if (i <= b && ok(i, true)) {
      r_el = std::abs(el_in[i - a] - el_c1);
      r_db = std::abs(dbr_in[i - a] - db_c1);
    }
    if (i >= b && ok(i, false)) {
      r_el = std::max(r_el, std::abs(el_out[i - a] - el_c2));
      r_db = std::max(r_db, std::abs(dbr_out[i - a] - db_c2));
    }
    if (r_el < 0.0) continue;
    out.nodes.push_back(i);
    out.el.push_back(r_el);
    out.dbr.push_back(r_db);
  }
  return out;
}

}  // namespace testing
