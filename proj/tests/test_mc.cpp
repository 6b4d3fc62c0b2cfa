#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>
#include <vector>

using namespace sqrtdiff;
using namespace sqrtdiff::mc;

namespace {

model::CoefficientSet unit_cir()
{
  return model::constant_coefficients(1.0, 1.0, 1.0, 0.5);
}

SimulationOptions small(Scheme scheme = Scheme::full_truncation_euler)
{
  SimulationOptions o;
  o.n_steps = 64;
  o.n_paths = 2000;
  o.scheme = scheme;
  o.master_seed = 7;
  return o;
}

} // namespace

TEST_CASE("zero noise gives the deterministic line x + t")
{
  const auto c = model::constant_coefficients(1.0, 0.0, 0.0, 0.5);
  for (auto scheme : {Scheme::full_truncation_euler, Scheme::exact_cir}) {
    auto o = small(scheme);
    o.x = 0.5;
    o.t = 2.0;
    o.n_paths = 10;
    const auto e = simulate_paths(c, o);
    for (std::size_t i = 0; i < e.n_paths; ++i) {
      CHECK(e.terminal[i] == doctest::Approx(2.5).epsilon(1e-12));
      for (std::size_t j = 0; j < e.record_steps.size(); ++j)
        CHECK(e.state(i, j) ==
              doctest::Approx(0.5 + e.time_grid[e.record_steps[j]]).epsilon(1e-12));
    }
    const auto m = sup_moment(e, 2.0, Sign::plus);
    CHECK(m.estimate == doctest::Approx(6.25).epsilon(1e-12));
    CHECK(m.std_error < 1e-12);
  }
}

TEST_CASE("Euler mean of the unit CIR is 1 within three standard errors")
{
  SimulationOptions o;
  o.n_steps = 512;
  o.n_paths = 100000;
  o.master_seed = 1;
  o.record_points = 0;
  const auto e = simulate_paths(unit_cir(), o);
  const auto m = terminal_mean(e);
  const double exact = cir::cir_mean_var(cir::cir_params(1, 1, 1, 1, 1)).mean;
  CHECK(exact == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::fabs(m.estimate - exact) <= 3.0 * m.std_error);
  CHECK(m.n_paths == 100000);
}

TEST_CASE("ensembles do not depend on the worker count")
{
  for (auto scheme : {Scheme::full_truncation_euler, Scheme::exact_cir}) {
    auto o = small(scheme);
    o.workers = 1;
    const auto one = simulate_paths(unit_cir(), o);
    o.workers = 8;
    const auto eight = simulate_paths(unit_cir(), o);
    CHECK(one.states == eight.states);
    CHECK(one.terminal == eight.terminal);
    CHECK(one.path_min == eight.path_min);
    CHECK(one.window_max == eight.window_max);
  }
}

TEST_CASE("grid, window and readout invariants")
{
  auto o = small();
  o.t = 3.0;
  const auto e = simulate_paths(model::constant_coefficients(0.1, 1.0, 1.5, 0.5), o);
  REQUIRE(e.time_grid.size() == 65);
  for (std::size_t k = 1; k < e.time_grid.size(); ++k)
    CHECK(e.time_grid[k] > e.time_grid[k - 1]);
  CHECK(e.time_grid[e.window_begin] >= 2.0 - 1e-12);
  CHECK(e.time_grid[e.window_begin - 1] < 2.0);
  CHECK(e.record_steps.front() == 0);
  CHECK(e.record_steps.back() == 64);
  // the Feller condition fails here, so raw Euler states do cross zero
  CHECK(*std::min_element(e.path_min.begin(), e.path_min.end()) < 0.0);
  for (std::size_t i = 0; i < e.n_paths; ++i) {
    CHECK(e.window_min[i] >= 0.0);
    CHECK(e.path_max[i] >= 0.0);
  }
}

TEST_CASE("exact-cir needs the constant square-root family")
{
  auto o = small(Scheme::exact_cir);
  CHECK_THROWS_AS(simulate_paths(model::constant_coefficients(1, 1, 1, 0.75), o), Error);
  try {
    simulate_paths(model::constant_coefficients(1, 1, 1, 0.75), o);
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::scheme_mismatch);
  }
  auto bad = small();
  bad.n_steps = 0;
  CHECK_THROWS_AS(simulate_paths(unit_cir(), bad), Error);
  bad = small();
  bad.x = -1.0;
  CHECK_THROWS_AS(simulate_paths(unit_cir(), bad), Error);
}

TEST_CASE("ball probability trivial cases and monotonicity")
{
  const auto e = simulate_paths(unit_cir(), small());
  const double top = *std::max_element(e.path_max.begin(), e.path_max.end());
  CHECK(estimate_ball_prob(e, 0.0, std::min(1.0, top / 3.0 + 1e-9)).estimate == 1.0);
  CHECK(estimate_ball_prob(e, 1e6, 1.0).estimate == 0.0);
  double previous = 0.0;
  for (double R = 0.01; R <= 1.0; R += 0.01) {
    const auto p = estimate_ball_prob(e, 3.0, R);
    CHECK(p.estimate >= previous);
    CHECK(p.std_error == doctest::Approx(std::sqrt(p.estimate * (1 - p.estimate) / e.n_paths)));
    previous = p.estimate;
  }
  CHECK_THROWS_AS(estimate_ball_prob(e, 1.0, 0.0), Error);
  CHECK_THROWS_AS(estimate_ball_prob(e, 1.0, 1.5), Error);
}

TEST_CASE("ball probability agrees between Euler and the exact scheme")
{
  SimulationOptions o;
  o.n_steps = 512;
  o.n_paths = 20000;
  o.master_seed = 11;
  o.record_points = 0;
  const auto euler = simulate_paths(unit_cir(), o);
  o.scheme = Scheme::exact_cir;
  const auto exact = simulate_paths(unit_cir(), o);
  const auto pe = estimate_ball_prob(euler, 2.5, 1.0 / 6.0);
  const auto px = estimate_ball_prob(exact, 2.5, 1.0 / 6.0);
  MESSAGE("euler ", pe.estimate, " exact ", px.estimate);
  CHECK(pe.estimate > 0.1);
  CHECK(pe.estimate < 0.9);
  CHECK(std::fabs(pe.estimate - px.estimate) <= 3.0 * std::hypot(pe.std_error, px.std_error));
  const auto qe = estimate_ball_prob(euler, 1.0, 1.0 / 6.0);
  const auto qx = estimate_ball_prob(exact, 1.0, 1.0 / 6.0);
  CHECK(std::fabs(qe.estimate - qx.estimate) <= 3.0 * std::hypot(qe.std_error, qx.std_error));
}

TEST_CASE("path seeds are deterministic and collision-free on samples")
{
  CHECK(derive_path_seed(42, 17) == derive_path_seed(42, 17));
  std::mt19937_64 rng(3);
  std::unordered_set<std::uint64_t> by_index;
  std::unordered_set<std::uint64_t> by_master;
  std::unordered_set<std::uint64_t> indices;
  std::unordered_set<std::uint64_t> masters;
  for (int n = 0; n < 1000000; ++n) {
    const std::uint64_t i = rng() & 0xffffffffULL;
    const std::uint64_t s = rng();
    if (indices.insert(i).second)
      CHECK_FALSE(!by_index.insert(derive_path_seed(99, i)).second);
    if (masters.insert(s).second)
      CHECK_FALSE(!by_master.insert(derive_path_seed(s, 5)).second);
  }
  CHECK(by_index.size() == indices.size());
  CHECK(by_master.size() == masters.size());
}

TEST_CASE("negative moments: floor handling")
{
  auto o = small();
  const auto c = model::constant_coefficients(0.1, 1.0, 1.5, 0.5);
  const auto e = simulate_paths(c, o);
  CHECK_THROWS_AS(sup_moment(e, 1.0, Sign::minus), Error);
  const auto m = sup_moment(e, 1.0, Sign::minus, true);
  CHECK(m.below_floor_fraction > 0.0);
  CHECK(m.n_paths == static_cast<std::size_t>(std::llround(e.n_paths * (1 - m.below_floor_fraction))));
}

TEST_CASE("negative moments are stable under refinement when p + 1 < l*")
{
  SimulationOptions o;
  o.n_paths = 20000;
  o.master_seed = 5;
  o.scheme = Scheme::exact_cir;
  // l* = 2 a / gamma^2 = 2, p = 0.5
  const auto report =
    refine_sup_moment(unit_cir(), o, 0.5, Sign::minus, {256, 512, 1024});
  MESSAGE("ratio ", report.ratio);
  CHECK(report.stable);
  for (const auto& r : report.results)
    CHECK(r.below_floor_fraction == 0.0);
}

TEST_CASE("negative moments drift under refinement when p + 1 > l*")
{
  SimulationOptions o;
  o.n_paths = 20000;
  o.master_seed = 5;
  o.scheme = Scheme::exact_cir;
  // l* = 1.2, p = 1
  const auto c = model::constant_coefficients(0.6, 1.0, 1.0, 0.5);
  const auto report = refine_sup_moment(c, o, 1.0, Sign::minus, {256, 512, 1024});
  MESSAGE("ratio ", report.ratio);
  CHECK_FALSE(report.stable);
  CHECK(report.ratio > 1.0);
}
