#include "isodelay/serialize.hpp"

#include <cmath>
#include <cstdio>

namespace isodelay {

using json = nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json regimes(const std::vector<Regime>& v) {
  json a = json::array();
  for (Regime r : v) a.push_back(std::string(to_string(r)));
  return a;
}

}  // namespace

json to_json(const ConditionReport& r) {
  json j;
  j["condition"] = r.condition;
  j["pass"] = r.pass;
  j["tolerance"] = number(r.tolerance);
  j["sup_norm"] = number(r.sup_norm);
  j["l2_norm"] = number(r.l2_norm);
  j["nodes"] = r.nodes;
  j["times"] = numbers(r.times);
  j["residual"] = numbers(r.residual);
  j["regime"] = regimes(r.regime);
  if (!r.differentiated.empty()) j["differentiated"] = numbers(r.differentiated);
  j["excluded"] = r.excluded;
  json consts = json::array();
  for (const auto& c : r.constants)
    consts.push_back({{"name", c.name}, {"regime", std::string(to_string(c.regime))}, {"value", numbers(c.value)}});
  j["constants"] = consts;
  json wins = json::array();
  for (const auto& w : r.windows)
    wins.push_back({{"name", w.name}, {"from", number(w.from)}, {"to", number(w.to)},
                    {"sup_norm", number(w.sup_norm)}, {"pass", w.pass}});
  j["windows"] = wins;
  return j;
}

json to_json(const NoetherProfile& p) {
  return {{"nodes", p.nodes},
          {"times", numbers(p.times)},
          {"value", numbers(p.value)},
          {"regime", regimes(p.regime)},
          {"excluded", p.excluded},
          {"drift", number(p.drift)},
          {"inner_drift", number(p.inner_drift)},
          {"outer_drift", number(p.outer_drift)},
          {"boundary_node", p.boundary}};
}

json to_json(const AbnormalityResult& a) {
  json rows = json::array();
  for (const auto& r : a.rows) rows.push_back(to_json(r));
  return {{"abnormal", a.abnormal}, {"rows", rows}};
}

json to_json(const HamiltonianDbr& d) {
  return {{"constancy", to_json(d.constancy)}, {"hypothesis", to_json(d.hypothesis)}};
}

json to_json(const SolveResult& r) {
  const SolveSettings& s = r.settings;
  json settings = {{"intervals", s.intervals},
                   {"inner_tolerance", s.inner_tolerance},
                   {"outer_tolerance", s.outer_tolerance},
                   {"max_inner", s.max_inner},
                   {"max_outer", s.max_outer},
                   {"penalty", s.penalty},
                   {"penalty_growth", s.penalty_growth},
                   {"penalty_cap", s.penalty_cap},
                   {"update", s.update == MultiplierUpdate::secant ? "secant" : "first_order"}};
  return {{"converged", r.converged},
          {"normal", r.normal},
          {"lambda", numbers(r.lambda.lambda)},
          {"J", number(r.J)},
          {"I", numbers(r.I)},
          {"gradient_norm", number(r.gradient_norm)},
          {"constraint_norm", number(r.constraint_norm)},
          {"inner_iterations", r.inner_iterations},
          {"outer_iterations", r.outer_iterations},
          {"h", number(r.trajectory.h)},
          {"settings", settings},
          {"euler_lagrange", to_json(r.el_report)}};
}

std::string summary_table(const std::vector<ConditionReport>& reports) {
  std::size_t width = 9;
  for (const auto& r : reports) width = std::max(width, r.condition.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %6s %12s %12s %10s  %s\n", static_cast<int>(width), "condition", "nodes", "sup",
                "l2", "tol", "verdict");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-*s %6zu %12.4e %12.4e %10.2e  %s\n", static_cast<int>(width), r.condition.c_str(),
                  r.nodes.size(), r.sup_norm, r.l2_norm, r.tolerance, r.pass ? "pass" : "FAIL");
    out += line;
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace isodelay
