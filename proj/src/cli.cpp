#include "isodelay/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "isodelay/builtins.hpp"
#include "isodelay/serialize.hpp"

namespace isodelay {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Format { json, text };

struct Common {
  std::string problem_path;
  std::string builtin;
  std::string traj_path;
  int intervals = 0;
  std::string lambda;
  std::optional<double> tol;
  std::string out_dir;
  std::string format = "text";
};

struct Loaded {
  DelayedProblem problem;
  std::string source;  ///< problem file bytes, hashed into the manifest
};

/// Signals a verdict-independent failure with a specific exit code.
struct ExitError {
  int code;
  std::string message;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("problem", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Loaded load(const Common& c) {
  if (c.problem_path.empty() == c.builtin.empty())
    throw ValidationError("problem", "give exactly one of --problem or --builtin");
  Loaded l;
  l.source = c.builtin.empty() ? read_text(c.problem_path) : builtin_problem_json(c.builtin);
  l.problem = parse_problem(l.source);
  return l;
}

std::vector<double> parse_list(const std::string& text, const char* field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !std::isfinite(v))
      throw ValidationError(field, "'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

MultiplierVector multipliers(const Common& c, const DelayedProblem& p) {
  std::vector<double> lam;
  if (!c.lambda.empty()) lam = parse_list(c.lambda, "lambda");
  else if (!c.builtin.empty() && builtin_multiplier(c.builtin)) lam = *builtin_multiplier(c.builtin);
  else lam.assign(static_cast<std::size_t>(p.k), 0.0);
  if (static_cast<int>(lam.size()) != p.k)
    throw ValidationError("lambda", "expected " + std::to_string(p.k) + " values, got " + std::to_string(lam.size()));
  return MultiplierVector(std::move(lam));
}

int default_intervals(const std::string& builtin) {
  if (builtin == "example33") return 300;
  if (builtin == "parabola") return 200;
  return 60;
}

Trajectory trajectory(const Common& c, const DelayedProblem& p) {
  if (!c.traj_path.empty()) return load_trajectory_csv(c.traj_path, p.n, p.mode == Mode::ocp ? p.m : 0);
  if (!c.builtin.empty()) {
    const int n = c.intervals > 0 ? c.intervals : default_intervals(c.builtin);
    if (auto t = builtin_extremal(c.builtin, n)) return *t;
  }
  throw ValidationError("traj", "a trajectory file is required");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExitError{2, "cannot write '" + path.string() + "'"};
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Writes the named outputs plus manifest.json into the output directory.
void write_outputs(const Common& c, const std::string& command, const Loaded& l, const json& settings,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  if (c.out_dir.empty()) return;
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ExitError{2, "cannot create '" + dir.string() + "': " + ec.message()};
  json outputs = json::array();
  for (const auto& [name, text] : files) {
    write_file(dir / name, text);
    outputs.push_back(name);
  }
  json manifest = {{"command", command},
                   {"problem", c.builtin.empty() ? c.problem_path : "builtin:" + c.builtin},
                   {"problem_hash", fnv1a_hex(l.source)},
                   {"settings", settings},
                   {"tool_version", kToolVersion},
                   {"outputs", outputs}};
  write_file(dir / "manifest.json", dump(manifest));
}

json common_settings(const Common& c) {
  json s;
  if (!c.traj_path.empty()) s["traj"] = c.traj_path;
  if (c.intervals > 0) s["n"] = c.intervals;
  if (!c.lambda.empty()) s["lambda"] = c.lambda;
  if (c.tol) s["tol"] = *c.tol;
  s["format"] = c.format;
  return s;
}

json reports_json(const std::vector<ConditionReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a;
}

// ---------------------------------------------------------------------------

struct SolveFlags {
  double inner_tol = 1e-10;
  double outer_tol = 1e-10;
  int max_outer = 60;
  bool secant = false;
};

int cmd_solve(const Common& c, const SolveFlags& f, std::ostream& out) {
  const Loaded l = load(c);
  SolveSettings s;
  s.intervals = c.intervals > 0 ? c.intervals : 60;
  s.inner_tolerance = f.inner_tol;
  s.outer_tolerance = f.outer_tol;
  s.max_outer = f.max_outer;
  s.update = f.secant ? MultiplierUpdate::secant : MultiplierUpdate::first_order;
  if (!c.lambda.empty()) s.initial_lambda = parse_list(c.lambda, "lambda");
  if (c.tol) s.report_tolerance = *c.tol;

  const SolveResult r = solve_isoperimetric(l.problem, s);
  ConditionOptions opt;
  opt.tolerance = r.el_report.tolerance;
  const AbnormalityResult ab = abnormality_check(l.problem, r.trajectory, opt);
  std::vector<ConditionReport> reports{r.el_report, dbr_residual(l.problem, r.lambda, r.trajectory, opt),
                                       cdur_residual(l.problem, r.lambda, r.trajectory, opt)};
  json result = to_json(r);
  result["problem"] = l.problem.name;
  json rep = {{"reports", reports_json(reports)}, {"abnormality", to_json(ab)}};

  json settings = common_settings(c);
  settings["inner_tol"] = f.inner_tol;
  settings["outer_tol"] = f.outer_tol;
  settings["max_outer"] = f.max_outer;
  settings["secant"] = f.secant;
  write_outputs(c, "solve", l, settings,
                {{"trajectory.csv", trajectory_to_csv(r.trajectory)},
                 {"result.json", dump(result)},
                 {"reports.json", dump(rep)}});

  if (c.format == "json") {
    out << dump(result);
  } else {
    char line[256];
    std::snprintf(line, sizeof line, "problem   %s\nconverged %s\nJ         %.12g\n", l.problem.name.c_str(),
                  r.converged ? "yes" : "no", r.J);
    out << line;
    for (std::size_t j = 0; j < r.lambda.size(); ++j) {
      std::snprintf(line, sizeof line, "lambda[%zu] %.12g   I[%zu] %.12g\n", j, r.lambda.lambda[j], j, r.I[j]);
      out << line;
    }
    out << "normal    " << (r.normal ? "yes" : "no (abnormal extremal: the multiplier rule degenerates)") << "\n";
    out << summary_table(reports);
  }
  return r.converged ? 0 : 3;
}

int cmd_verify(const Common& c, std::ostream& out) {
  const Loaded l = load(c);
  const DelayedProblem& p = l.problem;
  const Trajectory traj = trajectory(c, p);
  const MultiplierVector lam = multipliers(c, p);
  ConditionOptions opt;
  if (c.tol) opt.tolerance = *c.tol;

  std::vector<ConditionReport> reports;
  json extra;
  if (p.mode == Mode::lagrangian) {
    reports.push_back(el_residual(p, lam, traj, opt));
    reports.push_back(cdur_residual(p, lam, traj, opt));
    reports.push_back(dbr_residual(p, lam, traj, opt));
    extra["abnormality"] = to_json(abnormality_check(p, traj, opt));
  } else {
    const HamiltonianContext ctx(p, lam);
    for (auto& r : pontryagin_residuals(ctx, traj, opt)) reports.push_back(std::move(r));
    HamiltonianDbr d = hamiltonian_dbr_residual(ctx, traj, opt);
    reports.push_back(std::move(d.constancy));
    reports.push_back(std::move(d.hypothesis));
  }
  bool pass = true;
  for (const auto& r : reports) pass = pass && r.pass;

  json doc = {{"problem", p.name}, {"lambda", lam.lambda}, {"pass", pass}, {"reports", reports_json(reports)}};
  if (!extra.is_null()) doc.update(extra);
  write_outputs(c, "verify", l, common_settings(c), {{"reports.json", dump(doc)}});
  if (c.format == "json") {
    out << dump(doc);
  } else {
    out << summary_table(reports);
    if (extra.contains("abnormality"))
      out << "abnormal  " << (extra["abnormality"]["abnormal"].get<bool>() ? "yes" : "no") << "\n";
  }
  return pass ? 0 : 1;
}

struct NoetherFlags {
  std::string eta = "1";
  std::string xi;
  std::string phi;
  std::string subinterval;
};

/// Smooth bumps vanishing at t1 and t2, added to the state on (t1, t2).
Trajectory probe(const Trajectory& traj, const DelayedProblem& p, int wave) {
  Trajectory t = traj;
  t.kink_set.clear();
  const int first = static_cast<int>(std::lround((p.t1 - traj.t_start) / traj.h));
  const int last = traj.nodes() - 1;
  for (int i = first + 1; i < last; ++i) {
    const double s = std::sin(wave * std::numbers::pi * (traj.time(i) - p.t1) / (p.t2 - p.t1));
    for (int c = 0; c < p.n; ++c) t.q[static_cast<std::size_t>(i) * p.n + c] += 0.1 * (c + 1) * s;
  }
  return t;
}

int cmd_noether(const Common& c, const NoetherFlags& f, std::ostream& out) {
  const Loaded l = load(c);
  const DelayedProblem& p = l.problem;
  if (p.mode != Mode::lagrangian) throw ValidationError("mode", "noether needs a lagrangian-mode problem");
  const Trajectory traj = trajectory(c, p);
  const MultiplierVector lam = multipliers(c, p);
  std::vector<std::string> xi = f.xi.empty() ? std::vector<std::string>(static_cast<std::size_t>(p.n), "0") : split(f.xi);
  const Symmetry sym = Symmetry::parse(f.eta, xi, f.phi, p);
  ConditionOptions opt;
  if (c.tol) opt.tolerance = *c.tol;
  std::optional<Subinterval> sub;
  if (!f.subinterval.empty()) {
    const auto v = parse_list(f.subinterval, "subinterval");
    if (v.size() != 2) throw ValidationError("subinterval", "expected 'from,to'");
    sub = Subinterval{v[0], v[1]};
  }

  const NoetherProfile prof = noether_constant(p, lam, traj, sym, opt);
  json inv = json::array();
  double worst = std::abs(invariance_residual(p, lam, sym, traj, sub));
  inv.push_back({{"trajectory", "supplied"}, {"residual", worst}});
  for (int wave : {1, 2}) {
    const double r = invariance_residual(p, lam, sym, probe(traj, p, wave), sub);
    inv.push_back({{"trajectory", "probe" + std::to_string(wave)}, {"residual", r}});
    worst = std::max(worst, std::abs(r));
  }
  const bool drift_ok = prof.drift <= opt.tolerance;
  const bool inv_ok = worst <= opt.tolerance;
  json doc = {{"problem", p.name},
              {"eta", sym.eta.to_string()},
              {"xi", json::array()},
              {"gauge", sym.gauge.to_string()},
              {"lambda", lam.lambda},
              {"profile", to_json(prof)},
              {"invariance", {{"samples", inv}, {"max_abs", worst}, {"pass", inv_ok}}},
              {"tolerance", opt.tolerance},
              {"pass", drift_ok && inv_ok}};
  for (const auto& x : sym.xi) doc["xi"].push_back(x.to_string());

  json settings = common_settings(c);
  settings["eta"] = f.eta;
  settings["xi"] = f.xi;
  settings["phi"] = f.phi;
  if (!f.subinterval.empty()) settings["subinterval"] = f.subinterval;
  write_outputs(c, "noether", l, settings, {{"noether.json", dump(doc)}});
  if (c.format == "json") {
    out << dump(doc);
  } else {
    char line[256];
    std::snprintf(line, sizeof line, "drift       %.6e (inner %.6e, outer %.6e)  %s\ninvariance  %.6e  %s\n", prof.drift,
                  prof.inner_drift, prof.outer_drift, drift_ok ? "pass" : "FAIL", worst, inv_ok ? "pass" : "FAIL");
    out << line;
  }
  return drift_ok && inv_ok ? 0 : 1;
}

void add_common(CLI::App* app, Common& c, bool needs_traj) {
  app->add_option("--problem", c.problem_path, "Problem file (JSON)");
  app->add_option("--builtin", c.builtin, "Built-in problem name");
  if (needs_traj) app->add_option("--traj", c.traj_path, "Trajectory CSV");
  app->add_option("--n", c.intervals, "Number of grid intervals on [t1, t2]")->check(CLI::PositiveNumber);
  app->add_option("--lambda", c.lambda, "Multipliers, comma-separated");
  app->add_option("--tol", c.tol, "Verdict tolerance");
  app->add_option("--out", c.out_dir, "Output directory");
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "text"}));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solve and verify isoperimetric variational problems with a constant time delay", "isodelay"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common c;
  SolveFlags sf;
  NoetherFlags nf;
  auto* solve = app.add_subcommand("solve", "Compute a candidate extremal by direct transcription");
  add_common(solve, c, false);
  solve->add_option("--inner-tol", sf.inner_tol, "Gradient sup-norm tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--outer-tol", sf.outer_tol, "Constraint residual tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--max-outer", sf.max_outer, "Outer iteration limit")->check(CLI::PositiveNumber);
  solve->add_flag("--secant", sf.secant, "Secant multiplier update (k = 1)");

  auto* verify = app.add_subcommand("verify", "Evaluate the necessary conditions along a trajectory");
  add_common(verify, c, true);

  auto* noether = app.add_subcommand("noether", "Evaluate the constant of motion and the invariance residual");
  add_common(noether, c, true);
  noether->add_option("--eta", nf.eta, "Time generator eta(t, q)");
  noether->add_option("--xi", nf.xi, "State generators xi(t, q), comma-separated");
  noether->add_option("--phi", nf.phi, "Gauge term");
  noether->add_option("--subinterval", nf.subinterval, "from,to for the invariance integral");

  const bool is_solve_cmd = argc > 1 && std::string(argv[1]) == "solve";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(c, sf, out);
    if (verify->parsed()) return cmd_verify(c, out);
    return cmd_noether(c, nf, out);
  } catch (const ExitError& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return is_solve_cmd ? 3 : 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace isodelay
