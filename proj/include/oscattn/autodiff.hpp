#pragma once

// Reverse-mode differentiation on a recorded tape.
//
// Var carries a value and the index of the node that produced it (-1 for
// constants, which are folded and never recorded). Arithmetic on Vars appends
// nodes to the tape activated by TapeScope on the current thread. gradient()
// sweeps the tape backwards; replay() recomputes every node from the leaves
// with the same arithmetic as the forward pass.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "oscattn/core.hpp"

namespace osc {

struct PoisonedGradientError : Error { using Error::Error; };

namespace ad {

enum class Op : std::uint8_t {
  leaf,
  add, sub, mul, div,
  add_c, rsub_c, mul_c, div_c, rdiv_c,  // one operand is the constant aux
  neg, exp, log, sin, cos, sinh, cosh, tanh, sqrt, softplus, relu,
  pow_c,    // x^aux
  dot,      // sum_k a_k b_k over interleaved argument pairs
  lincomb,  // aux + sum_k coef_k x_k
};

struct Node {
  Op op;
  std::uint32_t arg;    // first entry in the argument list
  std::uint32_t nargs;
  std::uint32_t coef;   // first coefficient (lincomb)
  double aux;
  double value;
};

class Tape {
 public:
  int leaf(double v);
  int push(Op op, double value, int a, int b = -1, double aux = 0.0);
  int push_list(Op op, double value, std::span<const int> args, std::span<const double> coefs, double aux);

  double value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  void set_leaf(int id, double v);
  std::size_t size() const { return nodes_.size(); }
  void clear();

  /// Adjoints d out / d node for every node. Throws PoisonedGradientError if
  /// any recorded value is NaN.
  std::vector<double> gradient(int out) const;
  /// Recompute all non-leaf values in recording order; returns the value of `out`.
  double replay(int out);

 private:
  std::vector<Node> nodes_;
  std::vector<int> args_;
  std::vector<double> coefs_;
};

/// Tape receiving operations on this thread, or nullptr.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& t);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

struct Var {
  double v = 0.0;
  int id = -1;

  Var() = default;
  Var(double x) : v(x) {}  // NOLINT: implicit constant
  Var(double x, int node) : v(x), id(node) {}

  /// A new independent variable on the active tape.
  static Var param(double x);
  bool is_const() const { return id < 0; }
};

inline double value_of(const Var& x) { return x.v; }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

Var exp(const Var& x);
Var log(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var sinh(const Var& x);
Var cosh(const Var& x);
Var tanh(const Var& x);
Var sqrt(const Var& x);
Var pow(const Var& x, double p);
Var softplus(const Var& x);
Var relu(const Var& x);

/// sum_k a_k b_k as one node.
Var dot(std::span<const Var> a, std::span<const Var> b);
/// c0 + sum_k coef_k x_k as one node.
Var lincomb(std::span<const double> coef, std::span<const Var> x, double c0 = 0.0);

/// Adjoints of `out` looked up by Var.
class Gradient {
 public:
  Gradient() = default;
  explicit Gradient(std::vector<double> adj) : adj_(std::move(adj)) {}
  double operator[](const Var& x) const { return x.id < 0 ? 0.0 : adj_[static_cast<std::size_t>(x.id)]; }

 private:
  std::vector<double> adj_;
};

Gradient grad(const Var& out);

}  // namespace ad

/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace osc
