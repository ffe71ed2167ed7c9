#include "oscattn/autodiff.hpp"

#include <limits>

namespace osc::ad {

namespace {

thread_local Tape* g_tape = nullptr;

double apply_unary(Op op, double x, double aux) {
  switch (op) {
    case Op::add_c: return x + aux;
    case Op::rsub_c: return aux - x;
    case Op::mul_c: return x * aux;
    case Op::div_c: return x / aux;
    case Op::rdiv_c: return aux / x;
    case Op::neg: return -x;
    case Op::exp: return std::exp(x);
    case Op::log: return std::log(x);
    case Op::sin: return std::sin(x);
    case Op::cos: return std::cos(x);
    case Op::sinh: return std::sinh(x);
    case Op::cosh: return std::cosh(x);
    case Op::tanh: return std::tanh(x);
    case Op::sqrt: return std::sqrt(x);
    case Op::softplus: return osc::softplus(x);
    case Op::relu: return x > 0.0 ? x : 0.0;
    case Op::pow_c: return std::pow(x, aux);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

/// d f / d x for unary ops, from the input and the stored output.
double unary_partial(Op op, double x, double y, double aux) {
  switch (op) {
    case Op::add_c: return 1.0;
    case Op::rsub_c: return -1.0;
    case Op::mul_c: return aux;
    case Op::div_c: return 1.0 / aux;
    case Op::rdiv_c: return -y / x;
    case Op::neg: return -1.0;
    case Op::exp: return y;
    case Op::log: return 1.0 / x;
    case Op::sin: return std::cos(x);
    case Op::cos: return -std::sin(x);
    case Op::sinh: return std::cosh(x);
    case Op::cosh: return std::sinh(x);
    case Op::tanh: return 1.0 - y * y;
    case Op::sqrt: return 0.5 / y;
    case Op::softplus: return osc::sigmoid(x);
    case Op::relu: return x > 0.0 ? 1.0 : 0.0;
    case Op::pow_c: return aux * std::pow(x, aux - 1.0);
    default: return 0.0;
  }
}

Tape& tape_or_throw() {
  if (!g_tape) throw Error("autodiff: no active tape on this thread");
  return *g_tape;
}

Var unary(Op op, const Var& x, double aux = 0.0) {
  const double y = apply_unary(op, x.v, aux);
  if (x.is_const()) return Var(y);
  return Var(y, tape_or_throw().push(op, y, x.id, -1, aux));
}

Var binary(Op op, const Var& a, const Var& b) {
  const double y = apply_binary(op, a.v, b.v);
  return Var(y, tape_or_throw().push(op, y, a.id, b.id));
}

}  // namespace

int Tape::leaf(double v) { return push(Op::leaf, v, -1); }

int Tape::push(Op op, double value, int a, int b, double aux) {
  Node n{op, static_cast<std::uint32_t>(args_.size()), 0, 0, aux, value};
  if (a >= 0) {
    args_.push_back(a);
    ++n.nargs;
  }
  if (b >= 0) {
    args_.push_back(b);
    ++n.nargs;
  }
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

int Tape::push_list(Op op, double value, std::span<const int> args, std::span<const double> coefs, double aux) {
  Node n{op, static_cast<std::uint32_t>(args_.size()), static_cast<std::uint32_t>(args.size()),
         static_cast<std::uint32_t>(coefs_.size()), aux, value};
  args_.insert(args_.end(), args.begin(), args.end());
  coefs_.insert(coefs_.end(), coefs.begin(), coefs.end());
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

void Tape::set_leaf(int id, double v) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::leaf) throw Error("autodiff: set_leaf on a non-leaf node");
  n.value = v;
}

void Tape::clear() {
  nodes_.clear();
  args_.clear();
  coefs_.clear();
}

std::vector<double> Tape::gradient(int out) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (out < 0) return adj;
  adj[static_cast<std::size_t>(out)] = 1.0;
  for (int i = out; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (std::isnan(n.value)) throw PoisonedGradientError("autodiff: NaN recorded at node " + std::to_string(i));
    const double g = adj[static_cast<std::size_t>(i)];
    if (g == 0.0 || n.op == Op::leaf) continue;
    const int* a = args_.data() + n.arg;
    switch (n.op) {
      case Op::add:
        adj[a[0]] += g;
        adj[a[1]] += g;
        break;
      case Op::sub:
        adj[a[0]] += g;
        adj[a[1]] -= g;
        break;
      case Op::mul:
        adj[a[0]] += g * nodes_[a[1]].value;
        adj[a[1]] += g * nodes_[a[0]].value;
        break;
      case Op::div: {
        const double b = nodes_[a[1]].value;
        adj[a[0]] += g / b;
        adj[a[1]] -= g * n.value / b;
        break;
      }
      case Op::dot:
        for (std::uint32_t k = 0; k < n.nargs; k += 2) {
          adj[a[k]] += g * nodes_[a[k + 1]].value;
          adj[a[k + 1]] += g * nodes_[a[k]].value;
        }
        break;
      case Op::lincomb:
        for (std::uint32_t k = 0; k < n.nargs; ++k) adj[a[k]] += g * coefs_[n.coef + k];
        break;
      default:
        adj[a[0]] += g * unary_partial(n.op, nodes_[a[0]].value, n.value, n.aux);
    }
  }
  return adj;
}

double Tape::replay(int out) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    const int* a = args_.data() + n.arg;
    switch (n.op) {
      case Op::leaf: break;
      case Op::add:
      case Op::sub:
      case Op::mul:
      case Op::div: n.value = apply_binary(n.op, nodes_[a[0]].value, nodes_[a[1]].value); break;
      case Op::dot: {
        double acc = 0.0;
        for (std::uint32_t k = 0; k < n.nargs; k += 2) acc += nodes_[a[k]].value * nodes_[a[k + 1]].value;
        n.value = acc;
        break;
      }
      case Op::lincomb: {
        double acc = n.aux;
        for (std::uint32_t k = 0; k < n.nargs; ++k) acc += coefs_[n.coef + k] * nodes_[a[k]].value;
        n.value = acc;
        break;
      }
      default: n.value = apply_unary(n.op, nodes_[a[0]].value, n.aux);
    }
  }
  return value(out);
}

Tape* active_tape() { return g_tape; }

TapeScope::TapeScope(Tape& t) : prev_(g_tape) { g_tape = &t; }
TapeScope::~TapeScope() { g_tape = prev_; }

Var Var::param(double x) { return Var(x, tape_or_throw().leaf(x)); }

Var operator+(const Var& a, const Var& b) {
  if (a.is_const()) return b.is_const() ? Var(a.v + b.v) : unary(Op::add_c, b, a.v);
  if (b.is_const()) return unary(Op::add_c, a, b.v);
  return binary(Op::add, a, b);
}

Var operator-(const Var& a, const Var& b) {
  if (a.is_const()) return b.is_const() ? Var(a.v - b.v) : unary(Op::rsub_c, b, a.v);
  if (b.is_const()) return unary(Op::add_c, a, -b.v);
  return binary(Op::sub, a, b);
}

Var operator*(const Var& a, const Var& b) {
  if (a.is_const()) return b.is_const() ? Var(a.v * b.v) : unary(Op::mul_c, b, a.v);
  if (b.is_const()) return unary(Op::mul_c, a, b.v);
  return binary(Op::mul, a, b);
}

Var operator/(const Var& a, const Var& b) {
  if (a.is_const()) return b.is_const() ? Var(a.v / b.v) : unary(Op::rdiv_c, b, a.v);
  if (b.is_const()) return unary(Op::div_c, a, b.v);
  return binary(Op::div, a, b);
}

Var operator-(const Var& a) { return unary(Op::neg, a); }
Var exp(const Var& x) { return unary(Op::exp, x); }
Var log(const Var& x) { return unary(Op::log, x); }
Var sin(const Var& x) { return unary(Op::sin, x); }
Var cos(const Var& x) { return unary(Op::cos, x); }
Var sinh(const Var& x) { return unary(Op::sinh, x); }
Var cosh(const Var& x) { return unary(Op::cosh, x); }
Var tanh(const Var& x) { return unary(Op::tanh, x); }
Var sqrt(const Var& x) { return unary(Op::sqrt, x); }
Var pow(const Var& x, double p) { return unary(Op::pow_c, x, p); }
Var softplus(const Var& x) { return unary(Op::softplus, x); }
Var relu(const Var& x) { return unary(Op::relu, x); }

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw ShapeError("autodiff dot: length mismatch");
  bool any = false;
  for (std::size_t k = 0; k < a.size() && !any; ++k) any = !a[k].is_const() || !b[k].is_const();
  if (!any) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k].v * b[k].v;
    return Var(acc);
  }
  // Constant operands become leaves so the node is a plain pairwise sum.
  Tape& t = tape_or_throw();
  std::vector<int> args;
  args.reserve(2 * a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    args.push_back(a[k].is_const() ? t.leaf(a[k].v) : a[k].id);
    args.push_back(b[k].is_const() ? t.leaf(b[k].v) : b[k].id);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < args.size(); k += 2) acc += t.value(args[k]) * t.value(args[k + 1]);
  return Var(acc, t.push_list(Op::dot, acc, args, {}, 0.0));
}

Var lincomb(std::span<const double> coef, std::span<const Var> x, double c0) {
  if (coef.size() != x.size()) throw ShapeError("autodiff lincomb: length mismatch");
  std::vector<int> args;
  std::vector<double> cs;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].is_const()) {
      c0 += coef[k] * x[k].v;
    } else {
      args.push_back(x[k].id);
      cs.push_back(coef[k]);
    }
  }
  if (args.empty()) return Var(c0);
  Tape& t = tape_or_throw();
  double acc = c0;
  for (std::size_t k = 0; k < args.size(); ++k) acc += cs[k] * t.value(args[k]);
  return Var(acc, t.push_list(Op::lincomb, acc, args, cs, c0));
}

Gradient grad(const Var& out) {
  if (out.is_const()) return Gradient(std::vector<double>(active_tape() ? active_tape()->size() : 0, 0.0));
  return Gradient(tape_or_throw().gradient(out.id));
}

}  // namespace osc::ad
