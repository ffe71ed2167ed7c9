#include <doctest.h>

#include "attention_fixtures.hpp"
#include "oscattn/autodiff.hpp"

using namespace osc;
using namespace osc::testing;
using ad::Var;

namespace {

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

QueryExpansion<Var> lift(const QueryExpansion<>& q, bool params) {
  QueryExpansion<Var> out;
  out.grid = q.grid;
  auto conv = [&](const std::vector<double>& v) {
    std::vector<Var> r;
    for (double x : v) r.push_back(params ? Var::param(x) : Var(x));
    return r;
  };
  for (const auto& a : q.A) out.A.push_back(conv(a));
  for (const auto& b : q.B) out.B.push_back(conv(b));
  out.dc = conv(q.dc);
  return out;
}

KeyTrajectory<Var> lift(const KeyTrajectory<>& k) {
  KeyTrajectory<Var> out;
  out.anchor = k.anchor;
  for (const auto& p : k.params) out.params.push_back({Var::param(p.gamma), Var::param(p.omega0)});
  for (const auto& z : k.z0) out.z0.push_back({Var(z.x), Var(z.p)});
  for (double o : k.offset) out.offset.push_back(Var(o));
  out.forcing.freqs = k.forcing.freqs;
  for (const auto& r : k.forcing.P) out.forcing.P.push_back(std::vector<Var>(r.begin(), r.end()));
  for (const auto& r : k.forcing.Q) out.forcing.Q.push_back(std::vector<Var>(r.begin(), r.end()));
  return out;
}

}  // namespace

TEST_CASE("elementary gradients") {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<Var> p;
  for (double x : {0.3, -1.2, 2.5}) p.push_back(Var::param(x));
  Var loss = 0.0;
  for (const auto& x : p) loss = loss + x * x;
  const auto g = ad::grad(loss);
  for (const auto& x : p) CHECK(g[x] == 2.0 * x.v);

  const Var q = Var::param(0.7);
  const Var c = exp(Var(2.0)) * 3.0;
  CHECK(c.is_const());
  CHECK(ad::grad(c)[q] == 0.0);

  const Var x = Var::param(0.4);
  const Var f = sinh(x) * cosh(x) / sqrt(x) + pow(x, 3.0) - log(x) + tanh(x) * softplus(x) - 1.0 / x + relu(x - 1.0);
  const auto gf = ad::grad(f);
  const auto fd = finite_diff(
      [](double v) {
        return std::sinh(v) * std::cosh(v) / std::sqrt(v) + std::pow(v, 3.0) - std::log(v) + std::tanh(v) * softplus(v) -
               1.0 / v;
      },
      0.4, 1e-5);
  CHECK(close(gf[x], fd, 1e-8));
}

TEST_CASE("fused nodes") {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<Var> a{Var::param(1.0), Var(2.0), Var::param(-0.5)};
  std::vector<Var> b{Var::param(3.0), Var::param(0.25), Var(4.0)};
  const Var d = ad::dot(a, b);
  CHECK(d.v == 1.0 * 3.0 + 2.0 * 0.25 - 0.5 * 4.0);
  const auto g = ad::grad(d);
  CHECK(g[a[0]] == 3.0);
  CHECK(g[a[2]] == 4.0);
  CHECK(g[b[0]] == 1.0);
  CHECK(g[b[1]] == 2.0);

  const std::vector<double> coef{2.0, -1.0, 0.5};
  const Var l = ad::lincomb(coef, a, 1.0);
  const auto gl = ad::grad(l);
  CHECK(l.v == 1.0 + 2.0 - 2.0 - 0.25);
  CHECK(gl[a[0]] == 2.0);
  CHECK(gl[a[2]] == 0.5);
}

TEST_CASE("gradient linearity and replay") {
  Rng rng(1);
  ad::Tape tape;
  ad::TapeScope scope(tape);
  std::vector<Var> p;
  for (int i = 0; i < 5; ++i) p.push_back(Var::param(rng.uniform(0.1, 2.0)));
  auto f1 = [&] { return sin(p[0] * p[1]) + exp(-p[2]) * p[3]; };
  auto f2 = [&] { return sqrt(p[4] + p[0]) / (1.0 + p[1] * p[1]); };
  const Var a = f1(), b = f2(), s = a + b;
  const auto ga = ad::grad(a), gb = ad::grad(b), gs = ad::grad(s);
  for (const auto& x : p) CHECK(close(gs[x], ga[x] + gb[x], 1e-15));

  const double before = s.v;
  CHECK(tape.replay(s.id) == before);
  tape.set_leaf(p[0].id, p[0].v + 0.1);
  const double moved = tape.replay(s.id);
  CHECK(moved != before);
  tape.set_leaf(p[0].id, p[0].v);
  CHECK(tape.replay(s.id) == before);
}

TEST_CASE("NaN poisons the gradient") {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const Var x = Var::param(-1.0);
  const Var y = sqrt(x) + x;
  CHECK_THROWS_AS(ad::grad(y), PoisonedGradientError);
}

TEST_CASE("no active tape") {
  CHECK_THROWS_AS(Var::param(1.0), Error);
  CHECK((Var(1.0) + Var(2.0)).v == 3.0);
}

TEST_CASE("attention logit gradients match central differences") {
  Rng rng(2);
  for (int trial = 0; trial < 15; ++trial) {
    const int regime = trial % 3;
    const auto q0 = random_query(rng, 2, 2);
    const auto k0 = random_key(rng, 2, trial % 2 == 0 ? 2 : 0, regime);
    const double tj = k0.anchor + rng.uniform(0.2, 1.5);

    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto q = lift(q0, true);
    auto k = lift(k0);
    const Var loss = attention_logit(q, k, tj);
    CHECK(close(loss.v, attention_logit(q0, k0, tj), 1e-13));
    const auto g = ad::grad(loss);

    const double h = 1e-5;
    auto fd = [&](auto mutate) {
      auto qp = q0, qm = q0;
      auto kp = k0, km = k0;
      mutate(qp, kp, h);
      mutate(qm, km, -h);
      return (attention_logit(qp, kp, tj) - attention_logit(qm, km, tj)) / (2 * h);
    };
    // Critical keys stay critical only if gamma and omega0 move together.
    for (std::size_t c = 0; c < 2; ++c) {
      if (regime == 1) {
        const double dboth =
            fd([&](auto&, auto& kk, double e) { kk.params[c].gamma += e, kk.params[c].omega0 += e; });
        CHECK(rel_gap(g[k.params[c].gamma] + g[k.params[c].omega0], dboth) <= 1e-4);
        continue;
      }
      const double dg = fd([&](auto&, auto& kk, double e) { kk.params[c].gamma += e; });
      const double dw = fd([&](auto&, auto& kk, double e) { kk.params[c].omega0 += e; });
      CHECK(rel_gap(g[k.params[c].gamma], dg) <= 1e-4);
      CHECK(rel_gap(g[k.params[c].omega0], dw) <= 1e-4);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t c = 0; c < 2; ++c) {
        const double da = fd([&](auto& qq, auto&, double e) { qq.A[j][c] += e; });
        const double db = fd([&](auto& qq, auto&, double e) { qq.B[j][c] += e; });
        CHECK(rel_gap(g[q.A[j][c]], da) <= 1e-4);
        CHECK(rel_gap(g[q.B[j][c]], db) <= 1e-4);
      }
    }
  }
}
