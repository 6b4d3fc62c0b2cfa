#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/numerics.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace sqrtdiff::numerics;

TEST_CASE("pairwise sum is exact on small integers and stable on many terms")
{
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(i + 1);
  CHECK(pairwise_sum(v) == 500500.0);

  std::vector<double> tiny(1 << 20, 0.1);
  CHECK(pairwise_sum(tiny) == doctest::Approx(104857.6).epsilon(1e-14));
}

TEST_CASE("mean, std and quantile")
{
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(mean(v) == 2.5);
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(quantile(v, 0.5) == 2.5);
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
}

TEST_CASE("quadrature rules against closed forms")
{
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI).value ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate_singular([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0).value ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(integrate_to_infinity([](double x) { return std::exp(-x); }, 1.0).value ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
  auto x = linspace(0.0, 1.0, 1001);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i];
  CHECK(trapezoid(x, y) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("ols recovers an exact line and bootstrap brackets the slope")
{
  std::vector<double> x, y;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int i = 0; i < 100; ++i) {
    x.push_back(i * 0.1);
    y.push_back(3.0 - 2.0 * x.back() + noise(rng));
  }
  const auto fit = ols_bootstrap(x, y, 11);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-2));
  CHECK(fit.slope_ci_lo <= fit.slope);
  CHECK(fit.slope_ci_hi >= fit.slope);
  CHECK(fit.slope_ci_hi - fit.slope_ci_lo < 0.01);

  const auto again = ols_bootstrap(x, y, 11);
  CHECK(again.slope_ci_lo == fit.slope_ci_lo);
  CHECK(again.slope_ci_hi == fit.slope_ci_hi);
}

TEST_CASE("parallel_for covers every index once for any worker count")
{
  for (unsigned w : {1u, 2u, 3u, 8u}) {
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), w, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        ++hits[i];
    });
    for (int h : hits)
      CHECK(h == 1);
  }
}

TEST_CASE("grids")
{
  auto g = logspace(1e-3, 1e3, 7);
  CHECK(g.front() == doctest::Approx(1e-3));
  CHECK(g[3] == doctest::Approx(1.0));
  CHECK(g.back() == doctest::Approx(1e3));
}
