#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/bounds.hpp"
#include "sqrtdiff/error.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace sqrtdiff;
using namespace sqrtdiff::bounds;
using model::Ball;

TEST_CASE("exponential factors")
{
  auto e = eval_exponentials(3.0, 0.0, 5.0, 7.0);
  CHECK(e.e_p.value() == 1.0);
  CHECK(e.e_p_Z.value() == 1.0);
  e = eval_exponentials(2.0, 1.0, 1.0, 1.0);
  CHECK(e.e_p.value() == doctest::Approx(std::exp(4.0)).epsilon(1e-12));
  CHECK(e.e_p_Z.value() == doctest::Approx(std::exp(9.0)).epsilon(1e-12));
  CHECK(!e.e_p.saturated());

  e = eval_exponentials(64.0, 1.0, 3.0, 3.0);
  CHECK(e.e_p.saturated());
  CHECK(e.e_p.value() == std::numeric_limits<double>::max());
}

TEST_CASE("Malliavin-matrix constant")
{
  CHECK(eval_K_m(1.0, 1.0, 1, 0.0, 1.0, 1.0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(eval_K_m(4.0, 0.5, 2, 1.0, 1.0, 1.0) == doctest::Approx(46666.0).epsilon(1e-12));
  CHECK(std::exp(log_K_m(4.0, 0.5, 2, 1.0, 1.0, 1.0).log) ==
        doctest::Approx(46666.0).epsilon(1e-12));
  CHECK(eval_K_m(100.0, 1.0, 1, 2.0, 1.0, 1.0) > eval_K_m(100.0, 1.0, 1, 1.0, 1.0, 1.0));
  try {
    eval_K_m(0.0, 1.0, 1, 1.0, 1.0, 1.0);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::degenerate_time);
  }
}

TEST_CASE("combinatorial exponents")
{
  auto c = eval_combinatorial(3, 1, 2.0, 0.0);
  CHECK(c.phi_k == 147);
  CHECK(c.phi_prime_k == 0);
  CHECK(c.q_prime_k == 832.0);
  CHECK(phi(1, 1) == 75);
  CHECK(eval_combinatorial(3, 2, 1.0, 0.0).phi_prime_k == 8);
}

TEST_CASE("local polynomial factors with unit norms")
{
  auto table = model::uniform_norm_table(1.0, 4);
  auto ctx = make_context(1.0, 1.0, 1.0, 1, 1, 3);
  auto v = eval_local_polys(table, ctx);
  CHECK(v.P_k == 2.0);
  CHECK(v.P_sigma_k == 2.0);
  CHECK(v.P_C_m.value() == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(v.C_m.value() == doctest::Approx(69.0).epsilon(1e-12));
  CHECK(v.K_m.value() == doctest::Approx(eval_K_m(1.0, 1.0, 1, 1.0, 1.0, 1.0)).epsilon(1e-12));

  auto tiny = make_context(1e-300, 1.0, 1.0, 1, 1, 3);
  CHECK(eval_local_polys(table, tiny).P_k == 1.0);
}

TEST_CASE("P^C scales with the second diffusion norm as recomputed by hand")
{
  auto table = model::uniform_norm_table(1.0, 4);
  table.drift[2][0] = 1.5;
  table.diffusion[2][1] = 1.2;
  table.diffusion[2][2] = 1.7;
  const double t = 0.8;
  auto ctx = make_context(t, 1.0, 1.0, 1, 1, 3);
  auto before = eval_local_polys(table, ctx);
  table.diffusion[2][2] *= 2.0;
  auto after = eval_local_polys(table, ctx);
  const double st = std::sqrt(t);
  const double s2 = 1.7;
  const double ratio = std::pow((st * 1.5 * 8.0 * s2 * s2 * s2 + 1.44) /
                                  (st * 1.5 * s2 * s2 * s2 + 1.44),
                                4.0);
  CHECK(after.P_C_m.value() / before.P_C_m.value() == doctest::Approx(ratio).epsilon(1e-12));
}

TEST_CASE("missing norm orders are reported")
{
  auto table = model::uniform_norm_table(1.0, 2);
  auto ctx = make_context(1.0, 1.0, 1.0, 1, 1, 3);
  try {
    eval_local_polys(table, ctx);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::missing_norm);
  }
}

TEST_CASE("Theta exponents")
{
  auto ctx = make_context(1.0, 1.0, 1.0, 1, 1, 1);
  BoundValues v;
  v.C_m.log = 0.0;
  v.P_sigma_mk = 1.0;
  v.P_1 = 0.0;
  v.P_Z_1 = 0.0;
  CHECK(eval_theta(v, ctx).value() == 1.0);
  CHECK(theta_direct(v, ctx) == 1.0);

  v.C_m.log = std::log(2.0);
  CHECK(eval_theta(v, ctx).value() == doctest::Approx(4.0).epsilon(1e-14));

  v.C_m.log = 0.0;
  v.P_sigma_mk = 2.0;
  CHECK(eval_theta(v, ctx).value() == doctest::Approx(std::ldexp(1.0, 84)).epsilon(1e-12));
}

TEST_CASE("Lambda")
{
  auto ctx = make_context(1.0, 1.0, 1.0, 1, 1, 1);
  CHECK(eval_lambda(LogValue{0.0}, 1.0, ctx).value() == doctest::Approx(2.0).epsilon(1e-15));
  ctx = make_context(1.0, 1.0, 0.5, 1, 1, 3);
  CHECK(eval_lambda(LogValue{0.0}, 1.0, ctx).value() == doctest::Approx(16.0).epsilon(1e-14));
  auto ctx2 = make_context(1.0, 1.0, 0.5, 1, 1, 3, 2.0);
  CHECK(eval_lambda(LogValue{0.7}, 1.3, ctx2).value() ==
        doctest::Approx(2.0 * eval_lambda(LogValue{0.7}, 1.3, ctx).value()).epsilon(1e-14));
}

TEST_CASE("log-domain evaluation agrees with direct evaluation")
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 1.3);
  for (int trial = 0; trial < 20; ++trial) {
    auto table = model::uniform_norm_table(1.0, 2);
    for (auto* side : {&table.drift, &table.diffusion})
      for (auto& ball : *side)
        for (auto& x : ball)
          x = u(rng);
    table.c_star = 0.5 + 0.5 * (u(rng) - 1.0);
    auto ctx = make_context(0.05, 1.0, 0.7, 1, 1, 1);
    auto v = evaluate(table, ctx);
    REQUIRE(!v.any_saturated());
    const double theta = theta_direct(v, ctx);
    CHECK(v.theta_k.value() == doctest::Approx(theta).epsilon(1e-12));
    CHECK(v.lambda_k.value() ==
          doctest::Approx(lambda_direct(theta, v.P_0, ctx)).epsilon(1e-12));
  }
}

TEST_CASE("assembled constants are nondecreasing in every norm and in kappa")
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  std::uniform_real_distribution<double> bump(1.0, 1.5);
  for (int trial = 0; trial < 30; ++trial) {
    auto table = model::uniform_norm_table(1.0, 4);
    for (auto* side : {&table.drift, &table.diffusion})
      for (auto& ball : *side)
        for (auto& x : ball)
          x = u(rng);
    table.c_star = 1.0 / u(rng);
    auto ctx = make_context(0.5, 1.0, 1.0, 1, 1, 3);
    const auto base = evaluate(table, ctx);

    auto bumped = table;
    const int side = trial % 2;
    const int order = trial % 5;
    (side == 0 ? bumped.drift : bumped.diffusion)[2][order] *= bump(rng);
    const auto up = evaluate(bumped, ctx);
    CHECK(up.theta_k.log >= base.theta_k.log);
    CHECK(up.lambda_k.log >= base.lambda_k.log);
    CHECK(up.K_m.log >= base.K_m.log);
    CHECK(up.C_m.log >= base.C_m.log);

    auto worse = table;
    worse.c_star *= 0.5;
    CHECK(evaluate(worse, ctx).lambda_k.log >= base.lambda_k.log);

    auto ctx_k = make_context(0.5, 1.0, 1.0, 1, 1, 3, 1.5);
    CHECK(evaluate(table, ctx_k).lambda_k.log >= base.lambda_k.log);
  }
}

TEST_CASE("lambda is at least kappa R^{-mk}")
{
  auto table = model::uniform_norm_table(1.0, 4);
  auto ctx = make_context(1.0, 1.0, 0.5, 1, 1, 3, 2.0);
  auto v = evaluate(table, ctx);
  CHECK(v.lambda_k.value() >= 2.0 * 8.0);
}

TEST_CASE("density upper bound")
{
  CHECK(density_upper_bound(5.0, 0.0, 1.0, 1, 0) == 0.0);
  CHECK(density_upper_bound(2.0, 1.0, 1.0, 1, 0) == 4.0);
  CHECK(density_upper_bound(1.0, 1.0, 0.25, 1, 0) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(density_upper_bound(1.0, 1.0, 0.5, 2, 1) == 1.0 + std::pow(0.5, -5.0));
}

TEST_CASE("tail envelope")
{
  CHECK(envelope_constant(0.5, 1.0) == 4.5);
  auto env = make_envelope(0.5, 1.0, 1.0, 1.0);
  const double eps = 1e-3;
  CHECK(tail_envelope(env, 2.0 + eps) ==
        doctest::Approx(2.0 * std::exp(-0.25 * (1.0 + eps) / 9.0)).epsilon(1e-14));
  const double h = 1e-4;
  const double y = 7.0;
  const double slope =
    (std::log(tail_envelope(env, y + h)) - std::log(tail_envelope(env, y - h))) / (2 * h);
  CHECK(-slope == doctest::Approx(envelope_slope(env)).epsilon(1e-8));
  CHECK(envelope_slope(env) == doctest::Approx(0.25 / 9.0).epsilon(1e-15));
  CHECK(tail_envelope(env, 5.0) > tail_envelope(env, 6.0));
  try {
    tail_envelope(env, 2.0);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::out_of_regime);
  }
}

TEST_CASE("Markov tail bound")
{
  CHECK(markov_tail_bound(16.0, 2.0, 7.0) == 1.0);
  CHECK(markov_tail_bound(16.0, 2.0, 11.0) == 0.25);
  CHECK(markov_tail_bound(16.0, 2.0, 1e6) < 1e-10);
  CHECK_THROWS_AS(markov_tail_bound(1.0, 2.0, 3.0), Error);
}

TEST_CASE("polynomial regime slope for m = 1")
{
  for (int k : {3, 5}) {
    PolynomialRegime regime{1, k, 2.0, 0.0};
    const double y = 1e6;
    auto v = polynomial_regime_bounds(regime, y);
    const double slope = v.lambda_k.log / std::log(y);
    MESSAGE("k=" << k << " slope=" << slope << " q'=" << v.q_prime_k);
    CHECK(std::fabs(slope / v.q_prime_k - 1.0) <= 0.02);
  }
}
