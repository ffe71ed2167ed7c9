#include <doctest.h>

#include "oscattn/verify.hpp"

using namespace osc;

TEST_CASE("verify suites pass at the default tolerances") {
  VerifyConfig cfg;
  cfg.seed = 3;
  const std::vector<SuiteResult> rs{suite_kernel_oracle(cfg, 50), suite_propagator(cfg, 30), suite_anchoring(cfg, 30),
                                    suite_attention(cfg, 30),     suite_softmax(cfg, 500),     suite_perturbation(cfg, 2),
                                    suite_gradients(cfg, 1),      suite_baseline(cfg, 1024)};
  for (const auto& r : rs) {
    CAPTURE(to_json(r).dump());
    CHECK(r.pass);
    CHECK(r.cases > 0);
    CHECK(r.failure.is_null());
  }
}

TEST_CASE("verify: a vanishing tolerance fails and serializes the case") {
  VerifyConfig cfg;
  cfg.override_tolerances({{"all", 1e-30}});
  for (const auto& r : {suite_kernel_oracle(cfg, 10), suite_attention(cfg, 10), suite_perturbation(cfg, 1)}) {
    CHECK(!r.pass);
    REQUIRE(r.failure.is_object());
    CHECK(r.failure.contains("inputs"));
    CHECK(r.failure.contains("expected"));
    CHECK(r.failure.contains("got"));
    CHECK(r.failure["tolerance"] == 1e-30);
  }
  VerifyConfig one;
  one.override_tolerances({{"kernel_oracle", 1e-30}});
  CHECK(one.tol("kernel_oracle") == 1e-30);
  CHECK(one.tol("baseline") == 1e-6);
}

TEST_CASE("verify: overrides are validated and results are reproducible") {
  VerifyConfig cfg;
  CHECK_THROWS_AS(cfg.override_tolerances({{"kernel", 1e-3}}), ParameterError);
  CHECK_THROWS_AS(cfg.override_tolerances({{"baseline", 0.0}}), ParameterError);
  CHECK_THROWS_AS(cfg.override_tolerances({{"baseline", -1.0}}), ParameterError);

  cfg.seed = 7;
  const auto a = to_json(suite_attention(cfg, 40)).dump();
  const auto b = to_json(suite_attention(cfg, 40)).dump();
  CHECK(a == b);
  cfg.seed = 8;
  CHECK(to_json(suite_attention(cfg, 40)).dump() != a);
}
