#include "fracture/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "fracture/errors.hpp"

namespace fracture {

enum class Op { Const, VarT, VarX, VarY, Add, Sub, Mul, Div, Pow, Neg, Call };
enum class Fn { Sin, Cos, Exp, Sqrt, Log, Abs };

struct Expr::Node {
  Op op = Op::Const;
  double value = 0.0;
  Fn fn = Fn::Sin;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_const(double v) {
  auto n = std::make_shared<Expr::Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

NodePtr make_var(Op op) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

NodePtr make_call(Fn fn, NodePtr a) {
  if (a->op == Op::Const) {
    double v = a->value;
    switch (fn) {
      case Fn::Sin: return make_const(std::sin(v));
      case Fn::Cos: return make_const(std::cos(v));
      case Fn::Exp: return make_const(std::exp(v));
      case Fn::Sqrt: return make_const(std::sqrt(v));
      case Fn::Log: return make_const(std::log(v));
      case Fn::Abs: return make_const(std::fabs(v));
    }
  }
  auto n = std::make_shared<Expr::Node>();
  n->op = Op::Call;
  n->fn = fn;
  n->a = std::move(a);
  return n;
}

NodePtr make_unary(Op op, NodePtr a) {
  if (a->op == Op::Const) return make_const(-a->value);
  if (a->op == Op::Neg) return a->a;
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->a = std::move(a);
  return n;
}

// Binary constructor with light constant folding so derivatives stay small.
NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  if (a->op == Op::Const && b->op == Op::Const) {
    double x = a->value, y = b->value;
    switch (op) {
      case Op::Add: return make_const(x + y);
      case Op::Sub: return make_const(x - y);
      case Op::Mul: return make_const(x * y);
      case Op::Div: return make_const(x / y);
      case Op::Pow: return make_const(std::pow(x, y));
      default: break;
    }
  }
  switch (op) {
    case Op::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Op::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make_unary(Op::Neg, b);
      break;
    case Op::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Div:
      if (is_const(a, 0.0)) return make_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case Op::Pow:
      if (is_const(b, 0.0)) return make_const(1.0);
      if (is_const(b, 1.0)) return a;
      break;
    default: break;
  }
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse() {
    NodePtr n = expression(0);
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormulaError("formula '" + s_ + "': " + msg + " at column " + std::to_string(pos_ + 1));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  static int precedence(char c) {
    switch (c) {
      case '+':
      case '-': return 1;
      case '*':
      case '/': return 2;
      case '^': return 4;
      default: return -1;
    }
  }

  NodePtr expression(int min_prec) {
    NodePtr lhs = prefix();
    for (;;) {
      skip();
      if (pos_ >= s_.size()) break;
      char c = s_[pos_];
      int prec = precedence(c);
      if (prec < 0 || prec < min_prec) break;
      ++pos_;
      // '^' is right associative; the others are left associative.
      NodePtr rhs = expression(c == '^' ? prec : prec + 1);
      Op op = c == '+' ? Op::Add : c == '-' ? Op::Sub : c == '*' ? Op::Mul : c == '/' ? Op::Div : Op::Pow;
      lhs = make_binary(op, lhs, rhs);
    }
    return lhs;
  }

  NodePtr prefix() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '-') {
      ++pos_;
      // Unary minus binds looser than '^': -x^2 = -(x^2).
      return make_unary(Op::Neg, expression(3));
    }
    if (c == '+') {
      ++pos_;
      return expression(3);
    }
    if (c == '(') {
      ++pos_;
      NodePtr n = expression(0);
      skip();
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<size_t>(end - begin);
    return make_const(v);
  }

  NodePtr identifier() {
    size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    if (name == "t") return make_var(Op::VarT);
    if (name == "x") return make_var(Op::VarX);
    if (name == "y") return make_var(Op::VarY);
    if (name == "pi") return make_const(std::numbers::pi);
    static const std::pair<const char*, Fn> fns[] = {{"sin", Fn::Sin},   {"cos", Fn::Cos},
                                                     {"exp", Fn::Exp},   {"sqrt", Fn::Sqrt},
                                                     {"log", Fn::Log},   {"abs", Fn::Abs}};
    for (const auto& [fname, fn] : fns) {
      if (name == fname) {
        skip();
        if (pos_ >= s_.size() || s_[pos_] != '(') fail("expected '(' after " + name);
        ++pos_;
        NodePtr arg = expression(0);
        skip();
        if (pos_ >= s_.size() || s_[pos_] != ')') fail("expected ')'");
        ++pos_;
        return make_call(fn, arg);
      }
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string s_;
  size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, double t, double x, double y) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::VarT: return t;
    case Op::VarX: return x;
    case Op::VarY: return y;
    case Op::Add: return eval_node(*n.a, t, x, y) + eval_node(*n.b, t, x, y);
    case Op::Sub: return eval_node(*n.a, t, x, y) - eval_node(*n.b, t, x, y);
    case Op::Mul: return eval_node(*n.a, t, x, y) * eval_node(*n.b, t, x, y);
    case Op::Div: return eval_node(*n.a, t, x, y) / eval_node(*n.b, t, x, y);
    case Op::Pow: return std::pow(eval_node(*n.a, t, x, y), eval_node(*n.b, t, x, y));
    case Op::Neg: return -eval_node(*n.a, t, x, y);
    case Op::Call: {
      double v = eval_node(*n.a, t, x, y);
      switch (n.fn) {
        case Fn::Sin: return std::sin(v);
        case Fn::Cos: return std::cos(v);
        case Fn::Exp: return std::exp(v);
        case Fn::Sqrt: return std::sqrt(v);
        case Fn::Log: return std::log(v);
        case Fn::Abs: return std::fabs(v);
      }
    }
  }
  return 0.0;
}

bool depends_on_t(const NodePtr& n) {
  switch (n->op) {
    case Op::VarT: return true;
    case Op::Const:
    case Op::VarX:
    case Op::VarY: return false;
    default: return depends_on_t(n->a) || (n->b && depends_on_t(n->b));
  }
}

NodePtr derive(const NodePtr& n) {
  if (!depends_on_t(n)) return make_const(0.0);
  switch (n->op) {
    case Op::VarT: return make_const(1.0);
    case Op::Add: return make_binary(Op::Add, derive(n->a), derive(n->b));
    case Op::Sub: return make_binary(Op::Sub, derive(n->a), derive(n->b));
    case Op::Neg: return make_unary(Op::Neg, derive(n->a));
    case Op::Mul:
      return make_binary(Op::Add, make_binary(Op::Mul, derive(n->a), n->b),
                         make_binary(Op::Mul, n->a, derive(n->b)));
    case Op::Div: {
      NodePtr num = make_binary(Op::Sub, make_binary(Op::Mul, derive(n->a), n->b),
                                make_binary(Op::Mul, n->a, derive(n->b)));
      return make_binary(Op::Div, num, make_binary(Op::Mul, n->b, n->b));
    }
    case Op::Pow: {
      if (!depends_on_t(n->b)) {
        NodePtr exponent = make_binary(Op::Sub, n->b, make_const(1.0));
        return make_binary(Op::Mul, make_binary(Op::Mul, n->b, make_binary(Op::Pow, n->a, exponent)),
                           derive(n->a));
      }
      // d(a^b) = a^b (b' log a + b a'/a)
      NodePtr term1 = make_binary(Op::Mul, derive(n->b), make_call(Fn::Log, n->a));
      NodePtr term2 = make_binary(Op::Div, make_binary(Op::Mul, n->b, derive(n->a)), n->a);
      return make_binary(Op::Mul, n, make_binary(Op::Add, term1, term2));
    }
    case Op::Call: {
      NodePtr da = derive(n->a);
      NodePtr outer;
      switch (n->fn) {
        case Fn::Sin: outer = make_call(Fn::Cos, n->a); break;
        case Fn::Cos: outer = make_unary(Op::Neg, make_call(Fn::Sin, n->a)); break;
        case Fn::Exp: outer = n; break;
        case Fn::Sqrt: outer = make_binary(Op::Div, make_const(0.5), n); break;
        case Fn::Log: outer = make_binary(Op::Div, make_const(1.0), n->a); break;
        case Fn::Abs: outer = make_binary(Op::Div, n->a, n); break;
      }
      return make_binary(Op::Mul, outer, da);
    }
    default: return make_const(0.0);
  }
}

void print(const NodePtr& n, std::ostringstream& os) {
  switch (n->op) {
    case Op::Const: {
      std::ostringstream v;
      v.precision(17);
      v << n->value;
      os << v.str();
      return;
    }
    case Op::VarT: os << 't'; return;
    case Op::VarX: os << 'x'; return;
    case Op::VarY: os << 'y'; return;
    case Op::Neg:
      os << "(-";
      print(n->a, os);
      os << ')';
      return;
    case Op::Call: {
      static const char* names[] = {"sin", "cos", "exp", "sqrt", "log", "abs"};
      os << names[static_cast<int>(n->fn)] << '(';
      print(n->a, os);
      os << ')';
      return;
    }
    default: {
      char c = n->op == Op::Add ? '+' : n->op == Op::Sub ? '-' : n->op == Op::Mul ? '*' : n->op == Op::Div ? '/' : '^';
      os << '(';
      print(n->a, os);
      os << c;
      print(n->b, os);
      os << ')';
    }
  }
}

}  // namespace

Expr::Expr() : root_(make_const(0.0)) {}

Expr Expr::parse(const std::string& text) { return Expr(Parser(text).parse()); }

Expr Expr::constant(double value) { return Expr(make_const(value)); }

double Expr::eval(double t, double x, double y) const { return eval_node(*root_, t, x, y); }

Expr Expr::dt() const { return Expr(derive(root_)); }

bool Expr::is_constant() const { return root_->op == Op::Const; }

bool Expr::is_zero() const { return is_const(root_, 0.0); }

std::string Expr::str() const {
  std::ostringstream os;
  print(root_, os);
  return os.str();
}

}  // namespace fracture
