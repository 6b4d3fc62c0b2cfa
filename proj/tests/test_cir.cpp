#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace sqrtdiff;
using namespace sqrtdiff::cir;

namespace {

double total_mass(const std::function<double(double)>& pdf, double split)
{
  return numerics::integrate_singular(pdf, 0.0, split).value +
         numerics::integrate_to_infinity(pdf, split).value;
}

} // namespace

TEST_CASE("parameters of the unit CIR process")
{
  auto p = cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(p.delta == 4.0);
  CHECK(p.L == doctest::Approx((1.0 - std::exp(-1.0)) / 4.0).epsilon(1e-15));
  CHECK(p.L == doctest::Approx(0.158030).epsilon(1e-6));
  CHECK(p.zeta == doctest::Approx(4.0 / (std::exp(1.0) - 1.0)).epsilon(1e-15));
  CHECK(p.zeta == doctest::Approx(2.327906).epsilon(1e-6));
  CHECK(cir_params(1.0, 1.0, 1.0, 0.0, 1.0).zeta == 0.0);
}

TEST_CASE("b -> 0 matches the analytic limit")
{
  auto near = cir_params(1.0, 1e-12, 1.3, 2.0, 0.7);
  auto zero = cir_params(1.0, 0.0, 1.3, 2.0, 0.7);
  CHECK(zero.L == doctest::Approx(1.3 * 1.3 * 0.7 / 4.0).epsilon(1e-15));
  CHECK(zero.zeta == doctest::Approx(4.0 * 2.0 / (1.3 * 1.3 * 0.7)).epsilon(1e-15));
  CHECK(near.L / zero.L == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(near.zeta / zero.zeta == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("central chi-square special cases")
{
  auto d = ncx2_pdf(2.0, 4.0, 0.0);
  CHECK(d.pdf == doctest::Approx(std::exp(-1.0) / 2.0).epsilon(1e-14));
  CHECK(d.pdf == doctest::Approx(0.183940).epsilon(1e-6));
  CHECK(ncx2_pdf(1e-14, 2.0, 0.0).pdf == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("series and Bessel forms agree")
{
  double worst = 0.0;
  for (double delta : {0.5, 1.0, 2.0, 3.0, 4.0, 7.5, 12.0, 20.0}) {
    for (double zeta : {0.0, 0.1, 2.327, 10.0, 25.0, 50.0}) {
      for (double z : numerics::logspace(1e-6, 200.0, 41)) {
        const double s = ncx2_pdf(z, delta, zeta).pdf;
        const double b = ncx2_pdf_bessel(z, delta, zeta).pdf;
        if (s < 1e-250)
          continue;
        worst = std::max(worst, std::fabs(s - b) / s);
      }
    }
  }
  MESSAGE("worst relative gap " << worst);
  CHECK(worst <= 1e-10);
}

TEST_CASE("the series reports the number of terms it used")
{
  auto d = ncx2_pdf(40.0, 3.0, 30.0);
  CHECK(d.series_terms_used > 1);
  CHECK(d.series_terms_used < 10000);
  CHECK(d.method == DensityMethod::series);
}

TEST_CASE("densities integrate to one")
{
  const double ncx = total_mass([](double z) { return ncx2_pdf(z, 4.0, 2.327).pdf; }, 6.0);
  CHECK(ncx == doctest::Approx(1.0).epsilon(1e-8));
  for (double delta : {1.0, 2.0, 3.0, 4.0}) {
    for (double zeta : {0.0, 2.33, 10.0}) {
      const double mass =
        total_mass([&](double z) { return ncx2_pdf(z, delta, zeta).pdf; }, delta + zeta);
      CHECK_MESSAGE(std::fabs(mass - 1.0) <= 1e-6, "delta=" << delta << " zeta=" << zeta);
    }
  }
  auto p = cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(total_mass([&](double y) { return cir_density(p, y).pdf; }, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scale consistency of the CIR density")
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 50; ++i) {
    auto p = cir_params(u(rng), u(rng) - 1.0, u(rng), u(rng), u(rng));
    const double y = u(rng);
    CHECK(cir_density(p, y).pdf * p.L ==
          doctest::Approx(ncx2_pdf(y / p.L, p.delta, p.zeta).pdf).epsilon(1e-14));
  }
}

TEST_CASE("density behaves like y^{delta/2-1} at zero")
{
  auto p = cir_params(0.25, 1.0, 1.0, 1.0, 1.0);
  REQUIRE(p.delta == 1.0);
  double lo = 1e300, hi = -1e300;
  for (double y : numerics::logspace(1e-8, 1e-2, 25)) {
    const double g = std::log(cir_density(p, y).pdf) + 0.5 * std::log(y);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  CHECK(hi - lo < 0.1);
}

TEST_CASE("mean and variance")
{
  auto p = cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  auto m = cir_mean_var(p);
  CHECK(m.mean == doctest::Approx(1.0).epsilon(1e-15));

  auto early = cir_mean_var(cir_params(1.0, 1.0, 1.0, 1.5, 1e-12));
  CHECK(early.mean == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(early.variance == doctest::Approx(0.0).epsilon(1e-9));

  auto q = cir_params(0.7, 0.4, 0.9, 2.0, 1.5);
  auto mv = cir_mean_var(q);
  auto pdf = [&](double y) { return cir_density(q, y).pdf; };
  const double m1 = total_mass([&](double y) { return y * pdf(y); }, 2.0);
  const double m2 = total_mass([&](double y) { return y * y * pdf(y); }, 2.0);
  CHECK(m1 == doctest::Approx(mv.mean).epsilon(1e-6));
  CHECK(m2 - m1 * m1 == doctest::Approx(mv.variance).epsilon(1e-6));
}

TEST_CASE("CDF is consistent with the density")
{
  auto p = cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  for (double y : {0.2, 0.8, 1.5, 3.0}) {
    const double quad =
      numerics::integrate_singular([&](double s) { return cir_density(p, s).pdf; }, 0.0, y).value;
    CHECK(cir_cdf(p, y) == doctest::Approx(quad).epsilon(1e-9));
  }
}

TEST_CASE("exact sampling")
{
  SUBCASE("exponential special case")
  {
    auto p = cir_params(0.5, 1.0, 1.0, 0.0, 1.0); // delta = 2, zeta = 0
    REQUIRE(p.delta == 2.0);
    std::mt19937_64 rng(42);
    const int n = 1000000;
    std::vector<double> xs(n);
    for (auto& x : xs)
      x = cir_exact_sample(p, rng);
    const double se = numerics::sample_std(xs) / std::sqrt(double(n));
    CHECK(std::fabs(numerics::mean(xs) - 2.0 * p.L) <= 3.0 * se);
  }
  SUBCASE("mean matches the closed form")
  {
    for (double a : {0.2, 1.0}) {
      auto p = cir_params(a, 1.0, 1.0, 1.0, 1.0);
      std::mt19937_64 rng(43);
      const int n = 1000000;
      std::vector<double> xs(n);
      for (auto& x : xs)
        x = cir_exact_sample(p, rng);
      const double se = numerics::sample_std(xs) / std::sqrt(double(n));
      CHECK(std::fabs(numerics::mean(xs) - cir_mean_var(p).mean) <= 3.0 * se);
    }
  }
  SUBCASE("deterministic in the seed")
  {
    auto p = cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
    CHECK(cir_exact_sample(p, std::uint64_t{9}) == cir_exact_sample(p, std::uint64_t{9}));
    CHECK(cir_exact_sample(p, std::uint64_t{9}) != cir_exact_sample(p, std::uint64_t{10}));
  }
  SUBCASE("Kolmogorov-Smirnov distance")
  {
    for (double a : {0.25, 1.0}) {
      auto p = cir_params(a, 1.0, 1.0, 1.0, 1.0);
      const int n = 100000;
      std::vector<double> xs(n);
      for (int i = 0; i < n; ++i)
        xs[i] = cir_exact_sample(p, numerics::mix64(1000 + i));
      std::sort(xs.begin(), xs.end());
      double ks = 0.0;
      for (int i = 0; i < n; ++i) {
        const double F = cir_cdf(p, xs[i]);
        ks = std::max({ks, std::fabs(F - double(i) / n), std::fabs(F - double(i + 1) / n)});
      }
      MESSAGE("a=" << a << " KS=" << ks);
      CHECK(ks <= 0.01);
    }
  }
}
