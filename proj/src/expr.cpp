#include "isodelay/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

namespace isodelay {

namespace detail {

enum class Op : std::uint8_t { constant, slot, add, sub, mul, div, pow, neg, sin, cos, exp, ln, abs };

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  Slot slot{};
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

// One SSA row of the evaluation tape; operands refer to earlier rows.
struct Instr {
  Op op = Op::constant;
  double value = 0.0;
  Slot slot{};
  int a = -1;
  int b = -1;
  const Node* node = nullptr;
};

}  // namespace detail

using detail::Instr;
using detail::Node;
using detail::Op;
using NodePtr = std::shared_ptr<const Node>;

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::t: return "t";
    case SlotKind::q: return "q";
    case SlotKind::qd: return "qd";
    case SlotKind::qtau: return "qtau";
    case SlotKind::qdtau: return "qdtau";
    case SlotKind::u: return "u";
    case SlotKind::utau: return "utau";
    case SlotKind::p: return "p";
    case SlotKind::lambda: return "lambda";
  }
  return "?";
}

std::string to_string(Slot slot) {
  if (slot.kind == SlotKind::t) return "t";
  return std::string(to_string(slot.kind)) + "[" + std::to_string(slot.index) + "]";
}

std::string_view to_string(Mode mode) { return mode == Mode::lagrangian ? "lagrangian" : "ocp"; }

Mode parse_mode(std::string_view text) {
  if (text == "lagrangian" || text == "isoperimetric") return Mode::lagrangian;
  if (text == "ocp") return Mode::ocp;
  throw Error("unknown mode '" + std::string(text) + "'");
}

ParseError::ParseError(Kind kind, std::size_t column, const std::string& message)
    : Error("column " + std::to_string(column) + ": " + message), kind_(kind), column_(column) {}

bool SlotSpace::allows(Slot slot) const {
  auto in = [](int i, int bound) { return i >= 0 && i < bound; };
  switch (slot.kind) {
    case SlotKind::t: return true;
    case SlotKind::q:
    case SlotKind::qtau: return in(slot.index, n);
    case SlotKind::qd:
    case SlotKind::qdtau: return mode == Mode::lagrangian && in(slot.index, n);
    case SlotKind::u:
    case SlotKind::utau: return mode == Mode::ocp && in(slot.index, m);
    case SlotKind::p: return mode == Mode::ocp && in(slot.index, n);
    case SlotKind::lambda: return in(slot.index, k);
  }
  return false;
}

double EvalPoint::operator[](Slot slot) const {
  std::span<const double> v;
  switch (slot.kind) {
    case SlotKind::t: return t;
    case SlotKind::q: v = q; break;
    case SlotKind::qd: v = qd; break;
    case SlotKind::qtau: v = qtau; break;
    case SlotKind::qdtau: v = qdtau; break;
    case SlotKind::u: v = u; break;
    case SlotKind::utau: v = utau; break;
    case SlotKind::p: v = p; break;
    case SlotKind::lambda: v = lambda; break;
  }
  if (slot.index < 0 || static_cast<std::size_t>(slot.index) >= v.size())
    throw DomainError("evaluation point does not supply " + isodelay::to_string(slot));
  return v[static_cast<std::size_t>(slot.index)];
}

// ---------------------------------------------------------------------------
// Dual arithmetic

DualValue DualValue::variable(double value, std::size_t width, std::size_t seed) {
  DualValue d(value, width);
  d.partials_.at(seed) = 1.0;
  return d;
}

bool DualValue::has_zero_partials() const {
  return std::all_of(partials_.begin(), partials_.end(), [](double d) { return d == 0.0; });
}

namespace {

// result.partials = ca * a.partials + cb * b.partials
DualValue combine(double value, double ca, const DualValue& a, double cb, const DualValue& b) {
  std::vector<double> d(a.partials().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = ca * a.partials()[i] + cb * b.partials()[i];
  return {value, std::move(d)};
}

DualValue scale(double value, double c, const DualValue& a) {
  std::vector<double> d(a.partials());
  for (double& x : d) x *= c;
  return {value, std::move(d)};
}

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

double checked_pow(double base, double exponent) {
  if (base == 0.0 && exponent < 0.0) throw DomainError("division by zero in power");
  if (base < 0.0 && !is_integer(exponent))
    throw DomainError("fractional power of negative base");
  return std::pow(base, exponent);
}

}  // namespace

DualValue operator+(const DualValue& a, const DualValue& b) {
  return combine(a.value_ + b.value_, 1.0, a, 1.0, b);
}

DualValue operator-(const DualValue& a, const DualValue& b) {
  return combine(a.value_ - b.value_, 1.0, a, -1.0, b);
}

DualValue operator*(const DualValue& a, const DualValue& b) {
  return combine(a.value_ * b.value_, b.value_, a, a.value_, b);
}

DualValue operator/(const DualValue& a, const DualValue& b) {
  if (b.value_ == 0.0) throw DomainError("division by zero");
  const double v = a.value_ / b.value_;
  return combine(v, 1.0 / b.value_, a, -v / b.value_, b);
}

DualValue operator-(const DualValue& a) { return scale(-a.value_, -1.0, a); }

DualValue pow(const DualValue& base, const DualValue& exponent) {
  const double x = base.value();
  const double y = exponent.value();
  if (exponent.has_zero_partials()) {
    const double v = checked_pow(x, y);
    if (y == 0.0) return {v, base.partials().size()};
    if (x == 0.0 && y < 1.0 && !base.has_zero_partials())
      throw DomainError("derivative of fractional power at zero");
    return scale(v, y * checked_pow(x, y - 1.0), base);
  }
  if (x <= 0.0) throw DomainError("variable exponent needs a positive base");
  const double v = std::pow(x, y);
  return combine(v, y * v / x, base, v * std::log(x), exponent);
}

DualValue sin(const DualValue& x) { return scale(std::sin(x.value()), std::cos(x.value()), x); }
DualValue cos(const DualValue& x) { return scale(std::cos(x.value()), -std::sin(x.value()), x); }

DualValue exp(const DualValue& x) {
  const double v = std::exp(x.value());
  return scale(v, v, x);
}

DualValue log(const DualValue& x) {
  if (x.value() <= 0.0) throw DomainError("ln of non-positive value");
  return scale(std::log(x.value()), 1.0 / x.value(), x);
}

DualValue abs(const DualValue& x) {
  if (x.value() == 0.0) {
    if (!x.has_zero_partials()) throw DomainError("abs is not differentiable at 0");
    return {0.0, x.partials().size()};
  }
  return scale(std::abs(x.value()), x.value() > 0.0 ? 1.0 : -1.0, x);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string_view function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::ln: return "ln";
    case Op::abs: return "abs";
    default: return "";
  }
}

std::string_view infix(Op op) {
  switch (op) {
    case Op::add: return " + ";
    case Op::sub: return " - ";
    case Op::mul: return " * ";
    case Op::div: return " / ";
    case Op::pow: return " ^ ";
    default: return "";
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void print(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::constant: out += format_number(n.value); return;
    case Op::slot: out += to_string(n.slot); return;
    case Op::neg:
      out += "(-";
      print(*n.lhs, out);
      out += ")";
      return;
    case Op::sin:
    case Op::cos:
    case Op::exp:
    case Op::ln:
    case Op::abs:
      out += function_name(n.op);
      out += "(";
      print(*n.lhs, out);
      out += ")";
      return;
    default:
      out += "(";
      print(*n.lhs, out);
      out += infix(n.op);
      print(*n.rhs, out);
      out += ")";
  }
}

std::string print(const Node& n) {
  std::string s;
  print(n, s);
  return s;
}

bool same_tree(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case Op::constant: return a.value == b.value;
    case Op::slot: return a.slot == b.slot;
    default: break;
  }
  if (!same_tree(*a.lhs, *b.lhs)) return false;
  if (a.rhs) return same_tree(*a.rhs, *b.rhs);
  return true;
}

// ---------------------------------------------------------------------------
// Parsing

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

NodePtr make_constant(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::constant;
  n->value = v;
  return n;
}

NodePtr make_slot(Slot s) {
  auto n = std::make_shared<Node>();
  n->op = Op::slot;
  n->slot = s;
  return n;
}

class Parser {
 public:
  Parser(std::string_view src, const SlotSpace& space) : src_(src), space_(space) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ < src_.size()) {
      if (src_[pos_] == ',')
        fail(ParseError::Kind::arity, "unexpected ',' (functions take exactly one argument)");
      fail(ParseError::Kind::syntax, std::string("unexpected '") + src_[pos_] + "'");
    }
    return e;
  }

 private:
  [[noreturn]] void fail(ParseError::Kind kind, const std::string& msg) const {
    throw ParseError(kind, pos_ + 1, msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                  src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) fail(ParseError::Kind::syntax, std::string("expected '") + c + "' but input ended");
      fail(ParseError::Kind::syntax, std::string("expected '") + c + "'");
    }
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Op::add, lhs, term());
      else if (accept('-')) lhs = make(Op::sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Op::mul, lhs, unary());
      else if (accept('/')) lhs = make(Op::div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail(ParseError::Kind::syntax, "unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(ParseError::Kind::syntax, std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') digits();
      else pos_ = save;
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail(ParseError::Kind::syntax, "malformed number");
    }
    return make_constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);

    static constexpr std::pair<std::string_view, Op> functions[] = {
        {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"ln", Op::ln}, {"abs", Op::abs}};
    for (const auto& [fname, op] : functions) {
      if (name != fname) continue;
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != '(')
        fail(ParseError::Kind::arity, std::string(fname) + " takes exactly one argument in parentheses");
      ++pos_;
      NodePtr arg = expr();
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ',')
        fail(ParseError::Kind::arity, std::string(fname) + " takes exactly one argument");
      expect(')');
      return make(op, arg);
    }

    static constexpr std::pair<std::string_view, SlotKind> slots[] = {
        {"q", SlotKind::q},       {"qd", SlotKind::qd}, {"qtau", SlotKind::qtau},
        {"qdtau", SlotKind::qdtau}, {"u", SlotKind::u},  {"utau", SlotKind::utau},
        {"p", SlotKind::p},       {"lambda", SlotKind::lambda}};

    if (name == "t") {
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '[') fail(ParseError::Kind::arity, "t takes no index");
      return make_slot(Slot{SlotKind::t, 0});
    }
    for (const auto& [sname, kind] : slots) {
      if (name != sname) continue;
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != '[')
        fail(ParseError::Kind::arity, std::string(sname) + " needs an index, e.g. " +
                                          std::string(sname) + "[0]");
      ++pos_;
      skip_ws();
      const std::size_t index_start = pos_;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
      if (pos_ == index_start) fail(ParseError::Kind::syntax, "expected an integer index");
      int index = 0;
      std::from_chars(src_.data() + index_start, src_.data() + pos_, index);
      expect(']');
      const Slot slot{kind, index};
      if (!space_.allows(slot)) {
        pos_ = start;
        fail(ParseError::Kind::unknown_identifier,
             to_string(slot) + " is not a valid slot in " + std::string(to_string(space_.mode)) +
                 " mode (n=" + std::to_string(space_.n) + ", m=" + std::to_string(space_.m) +
                 ", k=" + std::to_string(space_.k) + ")");
      }
      return make_slot(slot);
    }
    pos_ = start;
    fail(ParseError::Kind::unknown_identifier, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view src_;
  const SlotSpace& space_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Tape construction

int emit(const Node& n, std::vector<Instr>& tape) {
  Instr ins;
  ins.op = n.op;
  ins.value = n.value;
  ins.slot = n.slot;
  ins.node = &n;
  if (n.lhs) ins.a = emit(*n.lhs, tape);
  if (n.rhs) ins.b = emit(*n.rhs, tape);
  tape.push_back(ins);
  return static_cast<int>(tape.size()) - 1;
}

void collect_slots(const Node& n, std::vector<Slot>& out) {
  if (n.op == Op::slot) out.push_back(n.slot);
  if (n.lhs) collect_slots(*n.lhs, out);
  if (n.rhs) collect_slots(*n.rhs, out);
}

NodePtr remap_tree(const NodePtr& n, const std::vector<std::pair<Slot, Slot>>& table) {
  if (n->op == Op::slot) {
    for (const auto& [from, to] : table)
      if (from == n->slot) return make_slot(to);
    return n;
  }
  if (n->op == Op::constant) return n;
  return make(n->op, remap_tree(n->lhs, table), n->rhs ? remap_tree(n->rhs, table) : nullptr);
}

[[noreturn]] void rethrow_domain(const DomainError& e, const Instr& ins) {
  throw DomainError(std::string(e.what()) + " in '" + print(*ins.node) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression

Expression::Expression() : Expression(make_constant(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {
  collect_slots(*root_, free_slots_);
  std::sort(free_slots_.begin(), free_slots_.end());
  free_slots_.erase(std::unique(free_slots_.begin(), free_slots_.end()), free_slots_.end());
  auto tape = std::make_shared<std::vector<Instr>>();
  emit(*root_, *tape);
  tape_ = std::move(tape);
}

Expression Expression::constant(double value) {
  if (std::signbit(value)) return Expression(make(Op::neg, make_constant(-value)));
  return Expression(make_constant(value));
}

bool Expression::depends_on(Slot slot) const {
  return std::binary_search(free_slots_.begin(), free_slots_.end(), slot);
}

bool Expression::only_uses(std::initializer_list<SlotKind> kinds) const {
  return std::all_of(free_slots_.begin(), free_slots_.end(), [&](const Slot& s) {
    return std::find(kinds.begin(), kinds.end(), s.kind) != kinds.end();
  });
}

std::string Expression::to_string() const { return print(*root_); }

bool operator==(const Expression& a, const Expression& b) { return same_tree(*a.root_, *b.root_); }

Expression Expression::remap(const std::vector<std::pair<Slot, Slot>>& table) const {
  return Expression(remap_tree(root_, table));
}

Expression parse_expression(std::string_view source, const SlotSpace& space) {
  Parser parser(source, space);
  return Expression(parser.parse());
}

double evaluate(const Expression& e, const EvalPoint& x) {
  const auto& tape = *e.tape_;
  std::vector<double> row(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const Instr& ins = tape[i];
    const double a = ins.a >= 0 ? row[ins.a] : 0.0;
    const double b = ins.b >= 0 ? row[ins.b] : 0.0;
    try {
      switch (ins.op) {
        case Op::constant: row[i] = ins.value; break;
        case Op::slot: row[i] = x[ins.slot]; break;
        case Op::add: row[i] = a + b; break;
        case Op::sub: row[i] = a - b; break;
        case Op::mul: row[i] = a * b; break;
        case Op::div:
          if (b == 0.0) throw DomainError("division by zero");
          row[i] = a / b;
          break;
        case Op::pow: row[i] = checked_pow(a, b); break;
        case Op::neg: row[i] = -a; break;
        case Op::sin: row[i] = std::sin(a); break;
        case Op::cos: row[i] = std::cos(a); break;
        case Op::exp: row[i] = std::exp(a); break;
        case Op::ln:
          if (a <= 0.0) throw DomainError("ln of non-positive value");
          row[i] = std::log(a);
          break;
        case Op::abs: row[i] = std::abs(a); break;
      }
    } catch (const DomainError& err) {
      rethrow_domain(err, ins);
    }
  }
  return row.back();
}

namespace {

DualValue eval_dual(const std::vector<Instr>& tape, const EvalPoint& x, std::size_t width,
                    const std::function<int(Slot)>& seed_of) {
  std::vector<DualValue> row(tape.size());
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const Instr& ins = tape[i];
    try {
      switch (ins.op) {
        case Op::constant: row[i] = DualValue(ins.value, width); break;
        case Op::slot: {
          const int seed = seed_of(ins.slot);
          row[i] = seed >= 0 ? DualValue::variable(x[ins.slot], width, static_cast<std::size_t>(seed))
                             : DualValue(x[ins.slot], width);
          break;
        }
        case Op::add: row[i] = row[ins.a] + row[ins.b]; break;
        case Op::sub: row[i] = row[ins.a] - row[ins.b]; break;
        case Op::mul: row[i] = row[ins.a] * row[ins.b]; break;
        case Op::div: row[i] = row[ins.a] / row[ins.b]; break;
        case Op::pow: row[i] = pow(row[ins.a], row[ins.b]); break;
        case Op::neg: row[i] = -row[ins.a]; break;
        case Op::sin: row[i] = sin(row[ins.a]); break;
        case Op::cos: row[i] = cos(row[ins.a]); break;
        case Op::exp: row[i] = exp(row[ins.a]); break;
        case Op::ln: row[i] = log(row[ins.a]); break;
        case Op::abs: row[i] = abs(row[ins.a]); break;
      }
    } catch (const DomainError& err) {
      rethrow_domain(err, ins);
    }
  }
  return row.back();
}

}  // namespace

DualValue gradient(const Expression& e, const EvalPoint& x) {
  const auto& slots = e.free_slots_;
  return eval_dual(*e.tape_, x, slots.size(), [&](Slot s) {
    return static_cast<int>(std::lower_bound(slots.begin(), slots.end(), s) - slots.begin());
  });
}

double partial(const Expression& e, Slot slot, const EvalPoint& x) {
  if (!e.depends_on(slot)) return 0.0;
  return eval_dual(*e.tape_, x, 1, [&](Slot s) { return s == slot ? 0 : -1; }).partial(0);
}

}  // namespace isodelay
