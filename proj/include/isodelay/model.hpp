#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isodelay/expr.hpp"

namespace isodelay {

/// Problem or trajectory data that breaks an invariant. `field` names the
/// offending entry of the problem file when there is one.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Polynomial piece of the history, coeffs[component][power] in powers of
/// absolute time t.
struct HistoryPiece {
  double from = 0.0;
  double to = 0.0;
  std::vector<std::vector<double>> coeffs;
};

/// Piecewise-polynomial initial function on [t1 - tau, t1].
class History {
 public:
  History() = default;
  History(std::vector<HistoryPiece> pieces, int n);

  const std::vector<HistoryPiece>& pieces() const { return pieces_; }
  double start() const;
  double end() const;

  /// Index of the piece used at `t`. Interior breakpoints resolve to the
  /// piece on the `prefer_right` side.
  std::size_t piece_at(double t, bool prefer_right = true) const;

  /// d^order/dt^order of component `comp` evaluated on piece `piece`.
  double evaluate(std::size_t piece, int comp, double t, int order = 0) const;
  double value(int comp, double t) const { return evaluate(piece_at(t), comp, t); }

 private:
  std::vector<HistoryPiece> pieces_;
  int n_ = 0;
};

/// A complete delayed isoperimetric problem (or, in ocp mode, a delayed
/// optimal control problem with isoperimetric constraints).
struct DelayedProblem {
  std::string name;
  Mode mode = Mode::lagrangian;
  int n = 1;
  int k = 0;
  int m = 0;  ///< control dimension, ocp mode only
  Expression lagrangian;
  std::vector<Expression> constraints;
  std::vector<Expression> dynamics;  ///< phi, ocp mode only
  double tau = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  History history;
  std::vector<double> terminal;  ///< empty in ocp mode when unset
  std::vector<double> levels;

  SlotSpace slot_space() const { return {mode, n, m, k}; }
  /// Throws ValidationError on the first broken invariant.
  void validate() const;
};

DelayedProblem parse_problem(std::string_view json_text);
DelayedProblem load_problem(const std::filesystem::path& file);
std::string problem_to_json(const DelayedProblem& problem);

struct MultiplierVector {
  std::vector<double> lambda;

  MultiplierVector() = default;
  explicit MultiplierVector(std::vector<double> values);
  std::size_t size() const { return lambda.size(); }
  std::span<const double> view() const { return lambda; }
};

/// Generator of a one-parameter family of transformations, together with
/// the gauge term.
struct Symmetry {
  Expression eta;
  std::vector<Expression> xi;
  Expression gauge;

  /// Parses generators; eta and xi may only reference t and q.
  static Symmetry parse(std::string_view eta, const std::vector<std::string>& xi,
                        std::string_view gauge, const DelayedProblem& problem);
  static Symmetry time_translation(int n);
};

enum class DerivativePolicy { one_sided_left, one_sided_right, central };

/// Uniform-grid samples of q (and u, p in ocp mode). Arrays are node-major.
struct Trajectory {
  double t_start = 0.0;
  double h = 0.0;
  int n = 1;
  int m = 0;
  std::vector<double> q;
  std::vector<double> u;
  std::vector<double> p;
  DerivativePolicy policy = DerivativePolicy::central;
  std::vector<int> kink_set;  ///< user-flagged kinks, merged with detected ones

  int nodes() const { return n > 0 ? static_cast<int>(q.size()) / n : 0; }
  double time(int i) const { return t_start + i * h; }
  double t_end() const { return time(nodes() - 1); }
  std::span<const double> state(int i) const { return {q.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)}; }
  std::span<const double> control(int i) const { return {u.data() + static_cast<std::size_t>(i) * m, static_cast<std::size_t>(m)}; }
  std::span<const double> costate(int i) const { return {p.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)}; }
  bool has_controls() const { return m > 0 && !u.empty(); }
  bool has_costate() const { return !p.empty(); }

  /// Node count >= 2, array sizes consistent, h > 0.
  void validate() const;
};

/// Samples of q at t1 - tau + i*h for a problem; q from `fill` on [t1, t2].
Trajectory sample_trajectory(const DelayedProblem& problem, int intervals,
                             const std::function<double(int comp, double t)>& fill);

/// Trajectory CSV: header `t,q0,..[,u0,..][,p0,..]`, one row per node.
Trajectory read_trajectory_csv(std::string_view text, int n, int m = 0);
Trajectory load_trajectory_csv(const std::filesystem::path& file, int n, int m = 0);
std::string trajectory_to_csv(const Trajectory& traj);

/// One-sided difference quotients at a node, and the policy value unless
/// the node is a kink.
struct NodeDerivative {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<double> value;  ///< empty at kinks
  bool kink = false;
};

NodeDerivative derivative(const Trajectory& traj, int node);

/// Flags node i when the slope jump there (inf-norm over components)
/// exceeds tol * (1 + scale) and is larger than the jumps at both
/// neighbours combined, so smooth curvature (uniform O(h) jumps) is never
/// flagged. The first and last entries are endpoints without a jump; a
/// neighbour that is an endpoint takes the jump of the opposite neighbour.
std::vector<int> detect_kinks(std::span<const double> jumps, std::span<const double> scales,
                              double tol);

constexpr double kDefaultKinkTolerance = 1e-6;

enum class Side { left, right, center };

/// A trajectory bound to its problem: commensurate index shift, exact
/// history derivatives, per-cell slopes, node derivatives and kinks.
///
/// Node 0 is t1 - tau, node first() is t1, node boundary() is t2 - tau and
/// node last() is t2. Cell c spans nodes c and c + 1.
class DelayGrid {
 public:
  DelayGrid(const DelayedProblem& problem, const Trajectory& traj,
            double kink_tol = kDefaultKinkTolerance);

  const DelayedProblem& problem() const { return *problem_; }
  const Trajectory& trajectory() const { return *traj_; }
  int n() const { return n_; }
  int shift() const { return shift_; }
  int first() const { return shift_; }
  int last() const { return last_; }
  int boundary() const { return last_ - shift_; }
  double h() const { return traj_->h; }
  double time(int i) const { return traj_->time(i); }

  std::span<const double> q(int i) const { return traj_->state(i); }
  std::span<const double> cell_start_slope(int c) const { return row(start_slope_, c); }
  std::span<const double> cell_end_slope(int c) const { return row(end_slope_, c); }
  std::span<const double> left(int i) const { return cell_end_slope(i - 1); }
  std::span<const double> right(int i) const { return cell_start_slope(i); }
  /// Two-sided derivative: exact inside the history, centred differences
  /// on (t1, t2), second-order one-sided differences at t1 and t2.
  std::span<const double> central(int i) const { return row(central_, i); }
  std::span<const double> second(int i) const { return row(second_, i); }
  std::span<const double> slope(int i, Side side) const;

  bool kink(int i) const { return is_kink_[static_cast<std::size_t>(i)] != 0; }
  /// True when any node in `nodes` is a kink (out-of-range nodes ignored).
  bool touches_kink(std::initializer_list<int> nodes) const;
  std::vector<int> kinks() const;

  /// Delayed-jet evaluation point at node i: q(i), slope(i, side),
  /// q(i - shift), slope(i - shift, side).
  void fill(PointData& out, int i, Side side) const;

 private:
  std::span<const double> row(const std::vector<double>& v, int i) const {
    return {v.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
  }

  const DelayedProblem* problem_;
  const Trajectory* traj_;
  int n_;
  int shift_;
  int last_;
  std::vector<double> start_slope_, end_slope_, central_, second_;
  std::vector<char> is_kink_;
};

/// Index shift tau / h; throws ValidationError unless it is an integer >= 1.
int commensurate_shift(double tau, double h);

struct FunctionalValues {
  double objective = 0.0;
  std::vector<double> constraints;
};

/// Trapezoidal values of the objective and constraint functionals over
/// [t1, t2]; each cell uses its own slope at both ends.
FunctionalValues functional_value(const DelayedProblem& problem, const Trajectory& traj);

}  // namespace isodelay
