#include "isodelay/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace isodelay {

using json = nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("", "cannot open '" + file.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool close(double a, double b, double scale) { return std::abs(a - b) <= 1e-9 * (1.0 + scale); }

}  // namespace

// ---------------------------------------------------------------------------
// History

History::History(std::vector<HistoryPiece> pieces, int n) : pieces_(std::move(pieces)), n_(n) {}

double History::start() const { return pieces_.empty() ? 0.0 : pieces_.front().from; }
double History::end() const { return pieces_.empty() ? 0.0 : pieces_.back().to; }

std::size_t History::piece_at(double t, bool prefer_right) const {
  if (pieces_.empty()) throw ValidationError("history", "no pieces");
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& pc = pieces_[i];
    const double eps = 1e-12 * (1.0 + std::abs(pc.to));
    if (prefer_right) {
      if (t < pc.to - eps || i + 1 == pieces_.size()) return i;
    } else if (t <= pc.to + eps || i + 1 == pieces_.size()) {
      return i;
    }
  }
  return pieces_.size() - 1;
}

double History::evaluate(std::size_t piece, int comp, double t, int order) const {
  const auto& c = pieces_.at(piece).coeffs.at(static_cast<std::size_t>(comp));
  // Horner on the order-th derivative of sum c_j t^j.
  double acc = 0.0;
  for (std::size_t j = c.size(); j-- > static_cast<std::size_t>(order);) {
    double factor = 1.0;
    for (int r = 0; r < order; ++r) factor *= static_cast<double>(j - static_cast<std::size_t>(r));
    acc = acc * t + factor * c[j];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Problem

void DelayedProblem::validate() const {
  if (n < 1) throw ValidationError("n", "state dimension must be >= 1");
  if (k < 0) throw ValidationError("k", "must be >= 0");
  if (!(t1 < t2)) throw ValidationError("t2", "need t1 < t2");
  if (!(tau > 0.0)) throw ValidationError("tau", "delay must be positive");
  if (!(tau < t2 - t1))
    throw ValidationError("tau", "delay " + std::to_string(tau) + " must be shorter than t2 - t1 = " +
                                     std::to_string(t2 - t1));
  if (static_cast<int>(constraints.size()) != k)
    throw ValidationError("g", "expected k = " + std::to_string(k) + " constraint integrands, got " +
                                   std::to_string(constraints.size()));
  if (static_cast<int>(levels.size()) != k)
    throw ValidationError("levels", "expected " + std::to_string(k) + " entries");
  for (double l : levels)
    if (!std::isfinite(l)) throw ValidationError("levels", "non-finite level");
  if (mode == Mode::lagrangian && static_cast<int>(terminal.size()) != n)
    throw ValidationError("terminal", "expected " + std::to_string(n) + " entries");
  if (mode == Mode::ocp) {
    if (m < 1) throw ValidationError("m", "control dimension must be >= 1 in ocp mode");
    if (static_cast<int>(dynamics.size()) != n)
      throw ValidationError("phi", "expected n = " + std::to_string(n) + " dynamics expressions");
    if (!terminal.empty() && static_cast<int>(terminal.size()) != n)
      throw ValidationError("terminal", "expected " + std::to_string(n) + " entries");
  }
  const auto& pieces = history.pieces();
  if (pieces.empty()) throw ValidationError("history", "at least one piece required");
  const double span = t2 - t1 + tau;
  if (!close(pieces.front().from, t1 - tau, span))
    throw ValidationError("history", "must start at t1 - tau = " + std::to_string(t1 - tau));
  if (!close(pieces.back().to, t1, span))
    throw ValidationError("history", "must end at t1 = " + std::to_string(t1));
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& pc = pieces[i];
    if (!(pc.from < pc.to)) throw ValidationError("history", "piece " + std::to_string(i) + " is empty");
    if (i > 0 && !close(pieces[i - 1].to, pc.from, span))
      throw ValidationError("history", "pieces must be contiguous");
    if (static_cast<int>(pc.coeffs.size()) != n)
      throw ValidationError("history", "piece " + std::to_string(i) + " needs coefficients for " +
                                           std::to_string(n) + " components");
  }
}

namespace {

Expression parse_field(const std::string& field, const std::string& source, const SlotSpace& space) {
  try {
    return parse_expression(source, space);
  } catch (const ParseError& e) {
    throw ValidationError(field, e.what());
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(key, e.what());
  }
}

std::vector<std::vector<double>> parse_coeffs(const json& c, int n) {
  std::vector<std::vector<double>> out;
  if (!c.is_array() || c.empty()) throw ValidationError("history", "coeffs must be a non-empty array");
  if (c.front().is_number()) {
    if (n != 1) throw ValidationError("history", "per-component coefficient arrays required when n > 1");
    out.push_back(c.get<std::vector<double>>());
  } else {
    out = c.get<std::vector<std::vector<double>>>();
  }
  return out;
}

}  // namespace

DelayedProblem parse_problem(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError("", std::string("malformed problem file: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("", "problem file must be a JSON object");

  DelayedProblem p;
  p.name = j.value("name", std::string("problem"));
  try {
    p.mode = parse_mode(j.value("mode", std::string("lagrangian")));
  } catch (const Error& e) {
    throw ValidationError("mode", e.what());
  }
  p.n = required<int>(j, "n");
  p.tau = required<double>(j, "tau");
  p.t1 = required<double>(j, "t1");
  p.t2 = required<double>(j, "t2");
  if (p.mode == Mode::ocp) p.m = j.value("m", p.n);

  if (!j.contains("g")) throw ValidationError("g", "missing (use [] with k = 0 for an unconstrained problem)");
  const auto g = required<std::vector<std::string>>(j, "g");
  p.k = j.value("k", static_cast<int>(g.size()));
  if (p.k != static_cast<int>(g.size()))
    throw ValidationError("g", "expected k = " + std::to_string(p.k) + " entries, got " + std::to_string(g.size()));

  const SlotSpace space = p.slot_space();
  p.lagrangian = parse_field("L", required<std::string>(j, "L"), space);
  for (std::size_t i = 0; i < g.size(); ++i)
    p.constraints.push_back(parse_field("g[" + std::to_string(i) + "]", g[i], space));
  if (p.mode == Mode::ocp) {
    const auto phi = required<std::vector<std::string>>(j, "phi");
    for (std::size_t i = 0; i < phi.size(); ++i)
      p.dynamics.push_back(parse_field("phi[" + std::to_string(i) + "]", phi[i], space));
  }
  for (const Expression* e : {&p.lagrangian}) {
    if (e->only_uses({SlotKind::t, SlotKind::q, SlotKind::qd, SlotKind::qtau, SlotKind::qdtau, SlotKind::u,
                      SlotKind::utau}))
      continue;
    throw ValidationError("L", "may not reference p or lambda");
  }

  const json& hist = j.contains("history") ? j.at("history") : throw ValidationError("history", "missing");
  if (!hist.contains("pieces") || !hist.at("pieces").is_array())
    throw ValidationError("history", "expected {pieces: [...]}");
  std::vector<HistoryPiece> pieces;
  for (const json& pc : hist.at("pieces")) {
    HistoryPiece piece;
    try {
      piece.from = pc.at("from").get<double>();
      piece.to = pc.at("to").get<double>();
    } catch (const json::exception& e) {
      throw ValidationError("history", e.what());
    }
    piece.coeffs = parse_coeffs(pc.at("coeffs"), p.n);
    pieces.push_back(std::move(piece));
  }
  p.history = History(std::move(pieces), p.n);

  if (j.contains("terminal")) p.terminal = required<std::vector<double>>(j, "terminal");
  p.levels = j.contains("levels") ? required<std::vector<double>>(j, "levels") : std::vector<double>{};
  p.validate();
  return p;
}

DelayedProblem load_problem(const std::filesystem::path& file) { return parse_problem(read_file(file)); }

std::string problem_to_json(const DelayedProblem& p) {
  json j;
  j["name"] = p.name;
  j["mode"] = std::string(to_string(p.mode));
  j["n"] = p.n;
  j["k"] = p.k;
  if (p.mode == Mode::ocp) j["m"] = p.m;
  j["tau"] = p.tau;
  j["t1"] = p.t1;
  j["t2"] = p.t2;
  j["L"] = p.lagrangian.to_string();
  j["g"] = json::array();
  for (const auto& g : p.constraints) j["g"].push_back(g.to_string());
  if (p.mode == Mode::ocp) {
    j["phi"] = json::array();
    for (const auto& f : p.dynamics) j["phi"].push_back(f.to_string());
  }
  json pieces = json::array();
  for (const auto& pc : p.history.pieces())
    pieces.push_back({{"from", pc.from}, {"to", pc.to}, {"coeffs", pc.coeffs}});
  j["history"] = {{"pieces", pieces}};
  if (!p.terminal.empty()) j["terminal"] = p.terminal;
  j["levels"] = p.levels;
  return j.dump(2);
}

MultiplierVector::MultiplierVector(std::vector<double> values) : lambda(std::move(values)) {
  for (double v : lambda)
    if (!std::isfinite(v)) throw ValidationError("lambda", "multipliers must be finite");
}

// ---------------------------------------------------------------------------
// Symmetry

Symmetry Symmetry::parse(std::string_view eta, const std::vector<std::string>& xi, std::string_view gauge,
                         const DelayedProblem& problem) {
  const SlotSpace space = problem.slot_space();
  Symmetry s;
  s.eta = parse_field("eta", std::string(eta), space);
  if (!s.eta.only_uses({SlotKind::t, SlotKind::q})) throw ValidationError("eta", "may only reference t and q");
  if (static_cast<int>(xi.size()) != problem.n)
    throw ValidationError("xi", "expected " + std::to_string(problem.n) + " components");
  for (std::size_t i = 0; i < xi.size(); ++i) {
    s.xi.push_back(parse_field("xi", xi[i], space));
    if (!s.xi.back().only_uses({SlotKind::t, SlotKind::q}))
      throw ValidationError("xi", "may only reference t and q");
  }
  s.gauge = gauge.empty() ? Expression() : parse_field("phi", std::string(gauge), space);
  return s;
}

Symmetry Symmetry::time_translation(int n) {
  Symmetry s;
  s.eta = Expression::constant(1.0);
  s.xi.assign(static_cast<std::size_t>(n), Expression());
  return s;
}

// ---------------------------------------------------------------------------
// Trajectory

void Trajectory::validate() const {
  if (n < 1) throw ValidationError("trajectory", "state dimension must be >= 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("trajectory", "step must be positive");
  if (q.size() % static_cast<std::size_t>(n) != 0) throw ValidationError("trajectory", "ragged state array");
  if (nodes() < 2) throw ValidationError("trajectory", "need at least two nodes");
  if (!u.empty() && u.size() != static_cast<std::size_t>(nodes()) * static_cast<std::size_t>(m))
    throw ValidationError("trajectory", "control array size mismatch");
  if (!p.empty() && p.size() != q.size()) throw ValidationError("trajectory", "costate array size mismatch");
  for (int i : kink_set)
    if (i < 0 || i >= nodes()) throw ValidationError("trajectory", "kink index out of range");
}

int commensurate_shift(double tau, double h) {
  const double ratio = tau / h;
  const double m = std::round(ratio);
  if (m < 1.0 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
    throw ValidationError("tau", "delay " + std::to_string(tau) + " is not an integer multiple of the step " +
                                     std::to_string(h));
  return static_cast<int>(m);
}

Trajectory sample_trajectory(const DelayedProblem& problem, int intervals,
                             const std::function<double(int, double)>& fill) {
  if (intervals < 1) throw ValidationError("n", "need at least one interval");
  Trajectory traj;
  traj.n = problem.n;
  traj.h = (problem.t2 - problem.t1) / intervals;
  const int shift = commensurate_shift(problem.tau, traj.h);
  traj.t_start = problem.t1 - shift * traj.h;
  const int nodes = shift + intervals + 1;
  traj.q.resize(static_cast<std::size_t>(nodes) * problem.n);
  for (int i = 0; i < nodes; ++i) {
    const double t = i == nodes - 1 ? problem.t2 : traj.time(i);
    for (int c = 0; c < problem.n; ++c)
      traj.q[static_cast<std::size_t>(i) * problem.n + c] =
          i <= shift ? problem.history.value(c, t) : fill(c, t);
  }
  return traj;
}

Trajectory read_trajectory_csv(std::string_view text, int n, int m) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trajectory", "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "t") throw ValidationError("trajectory", "first CSV column must be 't'");
  auto expect_cols = [&](std::size_t at, char prefix, int count) {
    for (int c = 0; c < count; ++c)
      if (at + c >= header.size() || header[at + c] != prefix + std::to_string(c))
        throw ValidationError("trajectory", std::string("expected column ") + prefix + std::to_string(c));
  };
  expect_cols(1, 'q', n);
  std::size_t col = 1 + static_cast<std::size_t>(n);
  bool with_u = false;
  bool with_p = false;
  if (m > 0 && col < header.size() && header[col] == "u0") {
    expect_cols(col, 'u', m);
    with_u = true;
    col += static_cast<std::size_t>(m);
  }
  if (col < header.size() && header[col] == "p0") {
    expect_cols(col, 'p', n);
    with_p = true;
    col += static_cast<std::size_t>(n);
  }
  if (col != header.size()) throw ValidationError("trajectory", "unexpected column '" + header[col] + "'");

  Trajectory traj;
  traj.n = n;
  traj.m = with_u ? m : 0;
  std::vector<double> times;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end == cell.c_str())
        throw ValidationError("trajectory", "row " + std::to_string(row) + ": bad number '" + cell + "'");
      vals.push_back(v);
    }
    if (vals.size() != header.size())
      throw ValidationError("trajectory", "row " + std::to_string(row) + " has " + std::to_string(vals.size()) +
                                              " columns, header has " + std::to_string(header.size()));
    times.push_back(vals[0]);
    std::size_t at = 1;
    for (int c = 0; c < n; ++c) traj.q.push_back(vals[at++]);
    if (with_u)
      for (int c = 0; c < m; ++c) traj.u.push_back(vals[at++]);
    if (with_p)
      for (int c = 0; c < n; ++c) traj.p.push_back(vals[at++]);
  }
  if (times.size() < 2) throw ValidationError("trajectory", "need at least two rows");
  traj.t_start = times.front();
  traj.h = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - traj.time(static_cast<int>(i))) > 1e-6 * traj.h)
      throw ValidationError("trajectory", "time grid is not uniform at row " + std::to_string(i + 2));
  traj.validate();
  return traj;
}

Trajectory load_trajectory_csv(const std::filesystem::path& file, int n, int m) {
  return read_trajectory_csv(read_file(file), n, m);
}

std::string trajectory_to_csv(const Trajectory& traj) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = "t";
  for (int c = 0; c < traj.n; ++c) out += ",q" + std::to_string(c);
  if (traj.has_controls())
    for (int c = 0; c < traj.m; ++c) out += ",u" + std::to_string(c);
  if (traj.has_costate())
    for (int c = 0; c < traj.n; ++c) out += ",p" + std::to_string(c);
  out += '\n';
  for (int i = 0; i < traj.nodes(); ++i) {
    out += num(traj.time(i));
    for (double v : traj.state(i)) out += "," + num(v);
    if (traj.has_controls())
      for (double v : traj.control(i)) out += "," + num(v);
    if (traj.has_costate())
      for (double v : traj.costate(i)) out += "," + num(v);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derivatives and kinks

std::vector<int> detect_kinks(std::span<const double> jumps, std::span<const double> scales, double tol) {
  std::vector<int> out;
  const auto count = static_cast<std::ptrdiff_t>(jumps.size());
  // Endpoints carry no jump; a missing neighbour is mirrored from the other side.
  auto jump_at = [&](std::ptrdiff_t i, std::ptrdiff_t mirror) {
    if (i >= 1 && i <= count - 2) return jumps[static_cast<std::size_t>(i)];
    if (mirror >= 1 && mirror <= count - 2) return jumps[static_cast<std::size_t>(mirror)];
    return 0.0;
  };
  for (std::ptrdiff_t i = 1; i + 1 < count; ++i) {
    const double j = jumps[static_cast<std::size_t>(i)];
    const double before = jump_at(i - 1, i + 1);
    const double after = jump_at(i + 1, i - 1);
    if (j > tol * (1.0 + scales[static_cast<std::size_t>(i)]) && j > before + after) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

// Inf-norm slope jump and slope scale at every node, from a slope accessor
// per cell (start, end); nodes 0 and last have no jump.
template <typename StartSlope, typename EndSlope>
void node_jumps(int nodes, int n, StartSlope start, EndSlope end, std::vector<double>& jumps,
                std::vector<double>& scales) {
  jumps.assign(static_cast<std::size_t>(nodes), 0.0);
  scales.assign(static_cast<std::size_t>(nodes), 0.0);
  for (int i = 1; i + 1 < nodes; ++i) {
    for (int c = 0; c < n; ++c) {
      const double l = end(i - 1, c);
      const double r = start(i, c);
      jumps[static_cast<std::size_t>(i)] = std::max(jumps[static_cast<std::size_t>(i)], std::abs(r - l));
      scales[static_cast<std::size_t>(i)] =
          std::max({scales[static_cast<std::size_t>(i)], std::abs(l), std::abs(r)});
    }
  }
}

}  // namespace

NodeDerivative derivative(const Trajectory& traj, int node) {
  traj.validate();
  const int nodes = traj.nodes();
  if (node < 0 || node >= nodes) throw std::out_of_range("node " + std::to_string(node) + " out of range");
  auto fd = [&](int c, int comp) {
    return (traj.q[static_cast<std::size_t>(c + 1) * traj.n + comp] -
            traj.q[static_cast<std::size_t>(c) * traj.n + comp]) /
           traj.h;
  };
  NodeDerivative d;
  for (int comp = 0; comp < traj.n; ++comp) {
    const double r = node + 1 < nodes ? fd(node, comp) : fd(node - 1, comp);
    const double l = node > 0 ? fd(node - 1, comp) : fd(node, comp);
    d.left.push_back(l);
    d.right.push_back(r);
  }
  std::vector<double> jumps, scales;
  node_jumps(nodes, traj.n, fd, fd, jumps, scales);
  const auto kinks = detect_kinks(jumps, scales, kDefaultKinkTolerance);
  d.kink = std::binary_search(kinks.begin(), kinks.end(), node) ||
           std::find(traj.kink_set.begin(), traj.kink_set.end(), node) != traj.kink_set.end();
  if (d.kink) return d;
  switch (traj.policy) {
    case DerivativePolicy::one_sided_left: d.value = node > 0 ? d.left : d.right; break;
    case DerivativePolicy::one_sided_right: d.value = node + 1 < nodes ? d.right : d.left; break;
    case DerivativePolicy::central:
      d.value.resize(d.left.size());
      for (std::size_t c = 0; c < d.left.size(); ++c)
        d.value[c] = (node > 0 && node + 1 < nodes) ? 0.5 * (d.left[c] + d.right[c]) : d.left[c];
      break;
  }
  return d;
}

// ---------------------------------------------------------------------------
// DelayGrid

DelayGrid::DelayGrid(const DelayedProblem& problem, const Trajectory& traj, double kink_tol)
    : problem_(&problem), traj_(&traj), n_(problem.n) {
  traj.validate();
  if (traj.n != problem.n)
    throw ValidationError("trajectory", "state dimension " + std::to_string(traj.n) + " does not match problem n = " +
                                            std::to_string(problem.n));
  shift_ = commensurate_shift(problem.tau, traj.h);
  const double span = problem.t2 - problem.t1;
  const int intervals = static_cast<int>(std::lround(span / traj.h));
  if (std::abs(intervals * traj.h - span) > 1e-6 * traj.h)
    throw ValidationError("trajectory", "step does not divide [t1, t2]");
  last_ = shift_ + intervals;
  if (std::abs(traj.t_start - (problem.t1 - problem.tau)) > 1e-6 * traj.h)
    throw ValidationError("trajectory", "must start at t1 - tau = " + std::to_string(problem.t1 - problem.tau));
  if (traj.nodes() != last_ + 1)
    throw ValidationError("trajectory", "expected " + std::to_string(last_ + 1) + " nodes covering [t1 - tau, t2], got " +
                                            std::to_string(traj.nodes()));
  const History& hist = problem.history;
  for (int i = 0; i <= shift_; ++i) {
    for (int c = 0; c < n_; ++c) {
      const double want = hist.value(c, time(i));
      if (std::abs(q(i)[c] - want) > 1e-6 * (1.0 + std::abs(want)))
        throw ValidationError("trajectory", "value at t = " + std::to_string(time(i)) +
                                                " does not match the history function");
    }
  }

  const auto rows = static_cast<std::size_t>(last_ + 1) * n_;
  start_slope_.assign(rows, 0.0);
  end_slope_.assign(rows, 0.0);
  central_.assign(rows, 0.0);
  second_.assign(rows, 0.0);
  auto at = [&](std::vector<double>& v, int i, int c) -> double& {
    return v[static_cast<std::size_t>(i) * n_ + c];
  };
  auto qv = [&](int i, int c) { return q(i)[c]; };
  const double h = traj.h;

  for (int c = 0; c < last_; ++c) {
    for (int comp = 0; comp < n_; ++comp) {
      if (c < shift_) {
        const std::size_t piece = hist.piece_at(0.5 * (time(c) + time(c + 1)));
        at(start_slope_, c, comp) = hist.evaluate(piece, comp, time(c), 1);
        at(end_slope_, c, comp) = hist.evaluate(piece, comp, time(c + 1), 1);
      } else {
        const double s = (qv(c + 1, comp) - qv(c, comp)) / h;
        at(start_slope_, c, comp) = s;
        at(end_slope_, c, comp) = s;
      }
    }
  }

  std::vector<double> jumps, scales;
  node_jumps(
      last_ + 1, n_, [&](int c, int comp) { return at(start_slope_, c, comp); },
      [&](int c, int comp) { return at(end_slope_, c, comp); }, jumps, scales);
  is_kink_.assign(static_cast<std::size_t>(last_ + 1), 0);
  for (int i : detect_kinks(jumps, scales, kink_tol)) is_kink_[static_cast<std::size_t>(i)] = 1;
  for (int i : traj.kink_set) is_kink_[static_cast<std::size_t>(i)] = 1;

  const bool long_enough = last_ - shift_ >= 2;
  for (int i = 0; i <= last_; ++i) {
    for (int comp = 0; comp < n_; ++comp) {
      double d1 = 0.0;
      double d2 = 0.0;
      if (i < shift_) {
        const std::size_t lp = hist.piece_at(time(i), false);
        const std::size_t rp = hist.piece_at(time(i), true);
        d1 = i == 0 ? hist.evaluate(rp, comp, time(i), 1)
                    : 0.5 * (hist.evaluate(lp, comp, time(i), 1) + hist.evaluate(rp, comp, time(i), 1));
        d2 = i == 0 ? hist.evaluate(rp, comp, time(i), 2)
                    : 0.5 * (hist.evaluate(lp, comp, time(i), 2) + hist.evaluate(rp, comp, time(i), 2));
      } else if (i == shift_) {
        if (long_enough && !kink(i + 1)) {
          d1 = (-3.0 * qv(i, comp) + 4.0 * qv(i + 1, comp) - qv(i + 2, comp)) / (2.0 * h);
          d2 = (qv(i, comp) - 2.0 * qv(i + 1, comp) + qv(i + 2, comp)) / (h * h);
        } else {
          d1 = (qv(i + 1, comp) - qv(i, comp)) / h;
        }
      } else if (i == last_) {
        if (long_enough && !kink(i - 1)) {
          d1 = (3.0 * qv(i, comp) - 4.0 * qv(i - 1, comp) + qv(i - 2, comp)) / (2.0 * h);
          d2 = (qv(i, comp) - 2.0 * qv(i - 1, comp) + qv(i - 2, comp)) / (h * h);
        } else {
          d1 = (qv(i, comp) - qv(i - 1, comp)) / h;
        }
      } else {
        d1 = (qv(i + 1, comp) - qv(i - 1, comp)) / (2.0 * h);
        d2 = (qv(i + 1, comp) - 2.0 * qv(i, comp) + qv(i - 1, comp)) / (h * h);
      }
      at(central_, i, comp) = d1;
      at(second_, i, comp) = d2;
    }
  }
}

std::span<const double> DelayGrid::slope(int i, Side side) const {
  switch (side) {
    case Side::left:
      if (i < 1) throw std::logic_error("no cell to the left of node 0");
      return left(i);
    case Side::right:
      if (i >= last_) throw std::logic_error("no cell to the right of t2");
      return right(i);
    case Side::center: return central(i);
  }
  return central(i);
}

bool DelayGrid::touches_kink(std::initializer_list<int> nodes) const {
  for (int i : nodes)
    if (i >= 0 && i <= last_ && kink(i)) return true;
  return false;
}

std::vector<int> DelayGrid::kinks() const {
  std::vector<int> out;
  for (int i = 0; i <= last_; ++i)
    if (kink(i)) out.push_back(i);
  return out;
}

void DelayGrid::fill(PointData& out, int i, Side side) const {
  if (i < shift_ || i > last_) throw std::logic_error("jet requested outside [t1, t2]");
  out.t = time(i);
  auto assign = [](std::vector<double>& dst, std::span<const double> src) { dst.assign(src.begin(), src.end()); };
  assign(out.q, q(i));
  assign(out.qd, slope(i, side));
  assign(out.qtau, q(i - shift_));
  assign(out.qdtau, slope(i - shift_, side));
}

// ---------------------------------------------------------------------------
// Functionals

FunctionalValues functional_value(const DelayedProblem& problem, const Trajectory& traj) {
  const DelayGrid grid(problem, traj);
  FunctionalValues out;
  out.constraints.assign(static_cast<std::size_t>(problem.k), 0.0);
  const double half = 0.5 * grid.h();
  PointData x;

  auto accumulate = [&](double weight) {
    const EvalPoint v = x.view();
    out.objective += weight * evaluate(problem.lagrangian, v);
    for (int j = 0; j < problem.k; ++j)
      out.constraints[static_cast<std::size_t>(j)] += weight * evaluate(problem.constraints[static_cast<std::size_t>(j)], v);
  };

  if (problem.mode == Mode::ocp) {
    if (!traj.has_controls()) throw ValidationError("trajectory", "ocp functionals need the control columns");
    for (int i = grid.first(); i <= grid.last(); ++i) {
      x.t = grid.time(i);
      x.q.assign(grid.q(i).begin(), grid.q(i).end());
      x.qtau.assign(grid.q(i - grid.shift()).begin(), grid.q(i - grid.shift()).end());
      x.u.assign(traj.control(i).begin(), traj.control(i).end());
      x.utau.assign(traj.control(i - grid.shift()).begin(), traj.control(i - grid.shift()).end());
      accumulate(i == grid.first() || i == grid.last() ? half : 2.0 * half);
    }
    return out;
  }

  for (int c = grid.first(); c < grid.last(); ++c) {
    grid.fill(x, c, Side::right);
    accumulate(half);
    grid.fill(x, c + 1, Side::left);
    accumulate(half);
  }
  return out;
}

}  // namespace isodelay
