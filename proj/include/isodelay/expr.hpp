#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace isodelay {

/// Which argument list expressions are written against.
///
/// Lagrangian mode uses the delayed jet (t, q, qd, qtau, qdtau); control mode
/// replaces the velocities with controls (t, q, u, qtau, utau) and adds the
/// costate p.
enum class Mode { lagrangian, ocp };

enum class SlotKind : std::uint8_t { t, q, qd, qtau, qdtau, u, utau, p, lambda };

/// One scalar argument component, e.g. qd[0].
struct Slot {
  SlotKind kind = SlotKind::t;
  int index = 0;

  auto operator<=>(const Slot&) const = default;
};

std::string to_string(Slot slot);
std::string_view to_string(SlotKind kind);
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  enum class Kind { syntax, unknown_identifier, arity };

  ParseError(Kind kind, std::size_t column, const std::string& message);

  Kind kind() const { return kind_; }
  /// 1-based column of the offending character (length + 1 at end of input).
  std::size_t column() const { return column_; }

 private:
  Kind kind_;
  std::size_t column_;
};

/// Division by zero, log of a non-positive number, fractional power of a
/// negative base, derivative of abs at 0, or a slot missing from the point.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Values for every argument slot. Spans are non-owning; see PointData.
struct EvalPoint {
  double t = 0.0;
  std::span<const double> q, qd, qtau, qdtau, u, utau, p, lambda;

  double operator[](Slot slot) const;
};

/// Owning storage that hands out an EvalPoint view.
struct PointData {
  double t = 0.0;
  std::vector<double> q, qd, qtau, qdtau, u, utau, p, lambda;

  EvalPoint view() const { return {t, q, qd, qtau, qdtau, u, utau, p, lambda}; }
};

/// Forward-mode dual number over a fixed basis of slots.
///
/// Partials are dense and aligned with the basis the value was seeded in;
/// mixing values with different partial counts is a logic error.
class DualValue {
 public:
  DualValue() = default;
  DualValue(double value, std::size_t width) : value_(value), partials_(width, 0.0) {}
  DualValue(double value, std::vector<double> partials)
      : value_(value), partials_(std::move(partials)) {}

  static DualValue variable(double value, std::size_t width, std::size_t seed);

  double value() const { return value_; }
  const std::vector<double>& partials() const { return partials_; }
  double partial(std::size_t i) const { return partials_.at(i); }
  bool has_zero_partials() const;

  friend DualValue operator+(const DualValue& a, const DualValue& b);
  friend DualValue operator-(const DualValue& a, const DualValue& b);
  friend DualValue operator*(const DualValue& a, const DualValue& b);
  friend DualValue operator/(const DualValue& a, const DualValue& b);
  friend DualValue operator-(const DualValue& a);

 private:
  double value_ = 0.0;
  std::vector<double> partials_;
};

DualValue pow(const DualValue& base, const DualValue& exponent);
DualValue sin(const DualValue& x);
DualValue cos(const DualValue& x);
DualValue exp(const DualValue& x);
DualValue log(const DualValue& x);
DualValue abs(const DualValue& x);

/// Legal slots for a parse: the mode picks the slot kinds, the dimensions
/// bound the indices. `m` is the control dimension (ocp mode only) and `k`
/// the number of multipliers.
struct SlotSpace {
  Mode mode = Mode::lagrangian;
  int n = 1;
  int m = 0;
  int k = 0;

  bool allows(Slot slot) const;
};

namespace detail {
struct Node;
struct Instr;
}  // namespace detail

/// Immutable parsed scalar formula.
class Expression {
 public:
  /// The zero expression.
  Expression();

  static Expression constant(double value);

  const std::vector<Slot>& free_slots() const { return free_slots_; }
  bool depends_on(Slot slot) const;
  /// True when every free slot has one of the given kinds.
  bool only_uses(std::initializer_list<SlotKind> kinds) const;

  /// Fully parenthesised form that parses back to the same tree.
  std::string to_string() const;

  /// Structural equality of the trees.
  friend bool operator==(const Expression& a, const Expression& b);

  /// Copy with every slot rewritten by `rename`.
  template <typename F>
  Expression map_slots(F&& rename) const;

 private:
  friend Expression parse_expression(std::string_view, const SlotSpace&);
  friend double evaluate(const Expression&, const EvalPoint&);
  friend DualValue gradient(const Expression&, const EvalPoint&);
  friend double partial(const Expression&, Slot, const EvalPoint&);

  explicit Expression(std::shared_ptr<const detail::Node> root);
  Expression remap(const std::vector<std::pair<Slot, Slot>>& table) const;

  std::shared_ptr<const detail::Node> root_;
  std::vector<Slot> free_slots_;
  std::shared_ptr<const std::vector<detail::Instr>> tape_;
};

Expression parse_expression(std::string_view source, const SlotSpace& space);

double evaluate(const Expression& e, const EvalPoint& x);

/// Value plus partials with respect to e.free_slots(), in that order.
DualValue gradient(const Expression& e, const EvalPoint& x);

/// Exact partial derivative with respect to one slot; 0 when the slot is
/// not free in `e`.
double partial(const Expression& e, Slot slot, const EvalPoint& x);

template <typename F>
Expression Expression::map_slots(F&& rename) const {
  std::vector<std::pair<Slot, Slot>> table;
  table.reserve(free_slots_.size());
  for (const Slot& s : free_slots_) table.emplace_back(s, rename(s));
  return remap(table);
}

}  // namespace isodelay
