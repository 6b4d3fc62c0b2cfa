#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"
#include "sqrtdiff/verify.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace sqrtdiff;
using namespace sqrtdiff::verify;

namespace {

density::DensityEstimate unit_tail()
{
  const auto p = cir::cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  return analytic_density(p, numerics::linspace(5.0, 30.0, 251));
}

} // namespace

TEST_CASE("tail shape of the unit CIR")
{
  const auto env = bounds::make_envelope(0.5, 1.0, 1.0, 1.0, 0.25);
  CHECK(bounds::envelope_slope(env) == doctest::Approx(0.25 / 9.0));
  const auto r = verify_tail(unit_tail(), env, 5.0, 30.0, 1);
  CHECK(r.outcome == Outcome::pass);
  REQUIRE(r.fits.size() == 1);
  const double L = cir::cir_params(1, 1, 1, 1, 1).L;
  MESSAGE("fitted slope ", r.fits[0].value, " vs 1/(2L) = ", 1.0 / (2.0 * L));
  // -log p = y / 2L - sqrt(zeta y / L) + O(log y), so the slope on [5, 30]
  // sits below its limit 1/(2L)
  CHECK(r.fits[0].value < 1.0 / (2.0 * L));
  CHECK(r.fits[0].value > 0.8 / (2.0 * L));
  CHECK(r.fits[0].ci_lo <= r.fits[0].value);
  CHECK(r.fits[0].ci_hi >= r.fits[0].value);
  REQUIRE(r.max_log_gap.has_value());
  CHECK(r.details["dominated"].get<bool>());
  CHECK(!r.witness.has_value());
}

TEST_CASE("gamma0 outside (0, 1/2) is reported as a failure")
{
  const auto env = bounds::make_envelope(0.5, 1.0, 1.0, 1.0, 10.0);
  const auto r = verify_tail(unit_tail(), env, 5.0, 30.0, 1);
  CHECK(r.outcome == Outcome::fail);
  REQUIRE(r.witness.has_value());
  CHECK(r.witness->find("outside the envelope regime") != std::string::npos);

  // with gamma = 2 the tail is flat enough that the slope test itself fails
  const auto p = cir::cir_params(1.0, 0.5, 2.0, 1.0, 1.0);
  const auto d = analytic_density(p, numerics::linspace(5.0, 30.0, 251));
  const auto env2 = bounds::make_envelope(0.5, 2.0, 1.0, 1.0, 10.0);
  const auto r2 = verify_tail(d, env2, 5.0, 30.0, 1);
  CHECK(r2.outcome == Outcome::fail);
  CHECK(r2.fits[0].ci_hi < bounds::envelope_slope(env2));
  CHECK(r2.witness->find("below the envelope slope") != std::string::npos);
}

TEST_CASE("tail preconditions")
{
  const auto env = bounds::make_envelope(0.5, 1.0, 1.0, 1.0, 0.25);
  CHECK_THROWS_AS(verify_tail(unit_tail(), env, 1.5, 30.0), Error);
  auto d = unit_tail();
  d.values[10] = 0.0;
  try {
    verify_tail(d, env, 5.0, 30.0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::nonpositive_density);
  }
}

TEST_CASE("tail shape holds across a grid of CIR parameters")
{
  for (double a : {0.5, 2.0})
    for (double b : {0.5, 2.0})
      for (double g : {0.5, 2.0}) {
        const auto p = cir::cir_params(a, b, g, 1.0, 1.0);
        const auto d = analytic_density(p, numerics::linspace(5.0, 30.0, 126));
        const auto env = bounds::make_envelope(0.5, g, 1.0, 1.0, 0.25);
        CHECK(verify_tail(d, env, 5.0, 30.0, 3).outcome == Outcome::pass);
      }
}

TEST_CASE("zero exponent of the analytic density")
{
  const auto grid = numerics::logspace(1e-6, 1e-3, 61);
  struct Case
  {
    double a;
    double delta;
  };
  for (Case c : {Case{0.25, 1.0}, Case{0.5, 2.0}, Case{0.75, 3.0}, Case{1.0, 4.0}}) {
    const auto p = cir::cir_params(c.a, 1.0, 1.0, 1.0, 1.0);
    CHECK(p.delta == doctest::Approx(c.delta));
    const auto r = verify_zero(analytic_density(p, grid), {.delta = c.delta}, 1e-6, 1e-3, 2);
    CHECK(r.outcome == Outcome::pass);
    CHECK(std::fabs(r.fits[0].value - (c.delta / 2 - 1)) <= 0.025);
  }
}

TEST_CASE("zero exponent: sign, l* and wrong expectations")
{
  const auto grid = numerics::logspace(1e-6, 1e-3, 61);
  const auto p = cir::cir_params(0.25, 1.0, 1.0, 1.0, 1.0);
  const auto d = analytic_density(p, grid);
  CHECK(verify_zero(d, {.expected_sign = -1}, 1e-6, 1e-3).outcome == Outcome::pass);
  const auto wrong = verify_zero(d, {.expected_sign = +1}, 1e-6, 1e-3);
  CHECK(wrong.outcome == Outcome::fail);
  CHECK(wrong.witness.has_value());
  CHECK(verify_zero(d, {.delta = 3.0}, 1e-6, 1e-3).outcome == Outcome::fail);
  CHECK(verify_zero(d, {}, 1e-6, 1e-3).outcome == Outcome::inconclusive);
  const auto silent = verify_zero(d, {.l_star = 0.5, .l_star_threshold = 3.0}, 1e-6, 1e-3);
  CHECK(silent.outcome == Outcome::inconclusive);
  CHECK(silent.details["l_star"].get<double>() == 0.5);
  CHECK_THROWS_AS(verify_zero(d, {}, 1e-6, 0.5), Error);
}

TEST_CASE("polynomial decay")
{
  const auto p = cir::cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  const auto d = analytic_density(p, numerics::linspace(10.0, 40.0, 301));
  for (double order : {0.0, 1.0, 2.0, 5.0, 10.0}) {
    const auto r = verify_polydecay(d, order, 10.0, 40.0, 4);
    CHECK(r.outcome == Outcome::pass);
    CHECK(r.details["max_at_left_end"].get<bool>());
  }

  // Pareto index 3: density 3 y^-4, so y^5 p(y) grows
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pareto(100000);
  for (auto& x : pareto)
    x = std::pow(1.0 - u(rng), -1.0 / 3.0);
  const auto grid = numerics::linspace(2.0, 10.0, 81);
  const auto est = density::kde(pareto, grid, 0.2, density::Kernel::gaussian);
  const auto r = verify_polydecay(est, 5.0, 2.0, 10.0, 4);
  CHECK(r.outcome == Outcome::fail);
  CHECK(r.fits[0].value > 0.0);
}

TEST_CASE("estimators agree with the analytic density")
{
  const auto p = cir::cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  const auto r = cross_validate(p, 100000, {1, 2});
  MESSAGE(to_json(r).dump(2));
  CHECK(r.outcome == Outcome::pass);
  CHECK(r.fits.size() == 3);
  const auto j = to_json(r);
  CHECK(j["claim"] == "oracle-xval");
  CHECK(j["outcome"] == "pass");
  CHECK(j["parameters"]["n_samples"] == 100000);
}

TEST_CASE("density of 1/X from the density of X")
{
  const auto p = cir::cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  auto samples = exact_samples(p, 100000, 13);
  for (auto& x : samples)
    x = 1.0 / x;
  const auto grid = numerics::linspace(0.2, 4.0, 381);
  const double h = density::default_bandwidth(samples, density::Kernel::log_gaussian);
  const auto est = density::kde(samples, grid, h, density::Kernel::log_gaussian);
  std::vector<double> gap(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid[i];
    gap[i] = std::fabs(est.values[i] - cir::cir_density(p, 1.0 / y).pdf / (y * y));
  }
  const double l1 = numerics::trapezoid(grid, gap);
  MESSAGE("L1 on [0.2, 4] = ", l1);
  CHECK(l1 <= 0.02);
}

TEST_CASE("reports are reproducible")
{
  const auto env = bounds::make_envelope(0.5, 1.0, 1.0, 1.0, 0.25);
  const auto a = to_json(verify_tail(unit_tail(), env, 5.0, 30.0, 77)).dump();
  const auto b = to_json(verify_tail(unit_tail(), env, 5.0, 30.0, 77)).dump();
  CHECK(a == b);
  CHECK(exit_code(Outcome::pass) == 0);
  CHECK(exit_code(Outcome::fail) == 1);
  CHECK(exit_code(Outcome::inconclusive) == 2);
}
