// Acceptance suite: one PASS/FAIL line per criterion on stdout, diagnostics
// on stderr. Exit status is the number of failed criteria.
//
//   acceptance [criterion...]   runs the listed criteria (default: all)

#include "sqrtdiff/boundary.hpp"
#include "sqrtdiff/bounds.hpp"
#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/cli.hpp"
#include "sqrtdiff/density.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/mc.hpp"
#include "sqrtdiff/numerics.hpp"
#include "sqrtdiff/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace sqrtdiff;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances ------------------------------------------------------

constexpr double rel_real = 1e-12;         // 1: real-valued constants
constexpr double mass_tol = 1e-6;          // 2: total mass
constexpr double series_bessel_tol = 1e-10; // 2: relative gap of the two forms
constexpr double ks_tol = 0.01;            // 2: KS distance at 1e5 samples
constexpr double mean_se_band = 3.0;       // 3: standard errors
constexpr double halving_band = 0.30;      // 3: ratio 2 +- 30%
constexpr double seed_stability = 0.15;    // 5: relative spread of the MC exponent
constexpr double zero_rel = 0.05;          // 6: of max(1, |delta/2 - 1|)
constexpr double l1_tol = 0.02;            // 7
constexpr double sup_tol = 0.05;           // 7: relative to the peak
constexpr double gaussian_tol = 1e-6;      // 7
constexpr double slope_tol = 0.02;         // 8

struct Verdict
{
  bool pass = false;
  std::string summary;
};

std::string fmt(double v, int digits = 4)
{
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

const fs::path& artifact_root()
{
  static const fs::path root = fs::current_path() / "acceptance_artifacts";
  return root;
}

cli::RunResult run_cli(const json& config)
{
  return cli::run(cli::config_from_json(config));
}

// --- 1 ----------------------------------------------------------------------

Verdict constant_calculus()
{
  const auto c = bounds::eval_combinatorial(3, 1, 2.0, 0.0);
  const double K = bounds::eval_K_m(1.0, 1.0, 1, 0.0, 1.0, 1.0);
  const auto e = bounds::eval_exponentials(2.0, 1.0, 1.0, 1.0);
  const bool ints = c.phi_k == 147 && c.phi_prime_k == 0 && c.q_prime_k == 832.0;
  const bool K_ok = std::fabs(K / 7.0 - 1.0) <= rel_real;
  const bool e_ok = std::fabs(e.e_p.value() / std::exp(4.0) - 1.0) <= rel_real &&
                    std::fabs(e.e_p_Z.value() / std::exp(9.0) - 1.0) <= rel_real;
  return {ints && K_ok && e_ok,
          "phi_3=" + std::to_string(c.phi_k) + " phi'_3=" + std::to_string(c.phi_prime_k) +
            " q'_3(2)=" + fmt(c.q_prime_k, 10) + " K_m=" + fmt(K, 15) + " e_2=exp(" +
            fmt(e.e_p.log, 15) + ") e^Z_2=exp(" + fmt(e.e_p_Z.log, 15) + ")"};
}

// --- 2 ----------------------------------------------------------------------

Verdict oracle_integrity()
{
  double worst_mass = 0.0;
  for (double delta : {1.0, 2.0, 3.0, 4.0})
    for (double zeta : {0.0, 2.33, 10.0}) {
      const auto pdf = [&](double z) { return cir::ncx2_pdf(z, delta, zeta).pdf; };
      const double split = delta + zeta;
      const double mass = numerics::integrate_singular(pdf, 0.0, split).value +
                          numerics::integrate_to_infinity(pdf, split).value;
      worst_mass = std::max(worst_mass, std::fabs(mass - 1.0));
    }

  // delta in [0.5, 20], zeta in [0, 50], z in [1e-6, 200] off the underflow floor
  double worst_gap = 0.0;
  for (double delta : numerics::linspace(0.5, 20.0, 14))
    for (double zeta : {0.0, 0.5, 2.33, 10.0, 25.0, 50.0})
      for (double z : numerics::logspace(1e-6, 200.0, 61)) {
        const double s = cir::ncx2_pdf(z, delta, zeta).pdf;
        if (s < 1e-250)
          continue;
        const double b = cir::ncx2_pdf_bessel(z, delta, zeta).pdf;
        worst_gap = std::max(worst_gap, std::fabs(s - b) / s);
      }

  double worst_ks = 0.0;
  for (double a : {0.25, 1.0}) {
    const auto p = cir::cir_params(a, 1.0, 1.0, 1.0, 1.0);
    auto xs = verify::exact_samples(p, 100000, 7);
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double F = cir::cir_cdf(p, xs[i]);
      worst_ks = std::max({worst_ks, std::fabs(F - i / n), std::fabs(F - (i + 1) / n)});
    }
  }
  return {worst_mass <= mass_tol && worst_gap <= series_bessel_tol && worst_ks <= ks_tol,
          "max |mass-1|=" + fmt(worst_mass, 3) + " max series/Bessel gap=" + fmt(worst_gap, 3) +
            " max KS=" + fmt(worst_ks, 3)};
}

// --- 3 ----------------------------------------------------------------------

Verdict simulation_consistency()
{
  const auto c = model::constant_coefficients(1.0, 1.0, 1.0, 0.5);
  mc::SimulationOptions o;
  o.n_steps = 512;
  o.n_paths = 100000;
  o.master_seed = 2024;
  o.record_points = 0;
  const auto m = mc::terminal_mean(mc::simulate_paths(c, o));
  const double z = std::fabs(m.estimate - 1.0) / m.std_error;
  const bool mean_ok = z <= mean_se_band;

  // weak error of the mean, pooled over five seeds
  const std::vector<int> steps = {128, 256, 512, 1024};
  std::vector<double> err, se;
  for (int n : steps) {
    double sum = 0.0, var = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      o.n_steps = n;
      o.master_seed = seed;
      const auto r = mc::terminal_mean(mc::simulate_paths(c, o));
      sum += r.estimate;
      var += r.std_error * r.std_error;
    }
    err.push_back(std::fabs(sum / 5.0 - 1.0));
    se.push_back(std::sqrt(var) / 5.0);
  }
  bool halves = true;
  std::string ratios;
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double r = err[i] / err[i + 1];
    halves = halves && std::fabs(r / 2.0 - 1.0) <= halving_band;
    ratios += (i ? "," : "") + fmt(r, 3);
  }
  std::string errs;
  for (std::size_t i = 0; i < err.size(); ++i)
    errs += (i ? "," : "") + fmt(err[i], 2) + "+-" + fmt(se[i], 2);
  return {mean_ok && halves,
          "mean=" + fmt(m.estimate, 6) + " (" + fmt(z, 3) + " SE) weak errors 128..1024 [" + errs +
            "] ratios [" + ratios + "] (need 2+-30%)"};
}

// --- 4 ----------------------------------------------------------------------

Verdict boundary_classification()
{
  int agree = 0, invariant = 0;
  for (int i = 0; i < 10; ++i)
    for (double side : {-1.0, 1.0}) {
      // 2a / gamma^2 from 3% to 48% away from the threshold
      const double nu = 1.0 + side * (0.03 + 0.05 * i);
      const double gamma = 0.5 + 0.15 * i;
      const auto c = model::constant_coefficients(0.5 * nu * gamma * gamma, 1.0, gamma, 0.5);
      const auto expected =
        side > 0 ? boundary::Classification::unattainable : boundary::Classification::attainable;
      std::set<int> seen;
      bool all = true;
      for (double cp : {0.5, 1.0, 2.0}) {
        const auto got = boundary::classify_zero_boundary(c, cp).classification;
        seen.insert(static_cast<int>(got));
        all = all && got == expected;
      }
      agree += all;
      invariant += seen.size() == 1;
    }
  return {agree == 20 && invariant == 20,
          std::to_string(agree) + "/20 match the Feller sign, " + std::to_string(invariant) +
            "/20 invariant under cpoint in {0.5,1,2}"};
}

// --- 5 ----------------------------------------------------------------------

Verdict tail_claim()
{
  int passed = 0;
  std::string failures;
  for (double a : {0.5, 1.0, 2.0})
    for (double b : {0.5, 1.0, 2.0})
      for (double g : {0.5, 1.0, 2.0}) {
        const json cfg = {{"model", {{"a", a}, {"b", b}, {"gamma", g}, {"alpha", 0.5}}},
                          {"task", {{"command", "verify-tail"}, {"source", "analytic"}}},
                          {"numerics", {{"gamma0", 0.25}}},
                          {"output", (artifact_root() / "c5" / "grid").string()}};
        const auto r = run_cli(cfg);
        if (r.exit_code == 0)
          ++passed;
        else
          failures += " (" + fmt(a) + "," + fmt(b) + "," + fmt(g) + ")";
      }

  std::vector<double> exps;
  for (auto [paths, seed] : {std::pair<int, int>{100000, 1}, {400000, 2}}) {
    const json cfg = {
      {"model", {{"a", 1.0}, {"b", 0.0}, {"gamma", 1.0}, {"alpha", 0.75}}},
      {"task", {{"command", "verify-tail"}, {"source", "mc"}, {"scheme", "euler"}}},
      {"numerics", {{"paths", paths}, {"steps", 512}}},
      {"seed", seed},
      {"output", (artifact_root() / "c5" / ("mc" + std::to_string(paths))).string()}};
    const auto r = run_cli(cfg);
    if (r.exit_code == 3) {
      std::cerr << "  mc tail run failed: " << r.report.dump() << "\n";
      exps.push_back(std::nan(""));
      continue;
    }
    exps.push_back(r.report["fits"][0]["value"].get<double>());
  }
  const double spread = std::fabs(exps[0] - exps[1]) / std::fabs(exps[1]);
  const bool mc_ok = exps[0] > 0.0 && exps[1] > 0.0 && spread <= seed_stability;
  return {passed == 27 && mc_ok,
          std::to_string(passed) + "/27 analytic shape tests pass" + failures +
            "; alpha=0.75 MC exponents " + fmt(exps[0]) + " (1e5) " + fmt(exps[1]) +
            " (4e5), spread " + fmt(100.0 * spread, 3) + "%"};
}

// --- 6 ----------------------------------------------------------------------

Verdict zero_claim()
{
  bool ok = true;
  std::string fits;
  for (double delta : {1.0, 2.0, 3.0, 4.0}) {
    const json cfg = {{"model", {{"a", delta / 4.0}, {"b", 1.0}, {"gamma", 1.0}, {"alpha", 0.5}}},
                      {"task", {{"command", "verify-zero"}, {"source", "analytic"}}},
                      {"output", (artifact_root() / "c6" / "analytic").string()}};
    const auto r = run_cli(cfg);
    const double beta = r.exit_code == 3 ? std::nan("") : r.report["fits"][0]["value"].get<double>();
    const double target = delta / 2.0 - 1.0;
    ok = ok && r.exit_code == 0 &&
         std::fabs(beta - target) <= zero_rel * std::max(1.0, std::fabs(target));
    fits += (fits.empty() ? "" : ",") + fmt(beta, 4);
  }
  std::string signs;
  for (double delta : {1.0, 3.0}) {
    const json cfg = {
      {"model", {{"a", delta / 4.0}, {"b", 1.0}, {"gamma", 1.0}, {"alpha", 0.5}}},
      {"task", {{"command", "verify-zero"}, {"source", "mc"}, {"scheme", "exact"}}},
      {"numerics", {{"paths", 400000}}},
      {"seed", 11},
      {"output", (artifact_root() / "c6" / "kde").string()}};
    const auto r = run_cli(cfg);
    ok = ok && r.exit_code == 0;
    signs += (signs.empty() ? "" : ",") +
             (r.exit_code == 3 ? std::string("error") : fmt(r.report["fits"][0]["value"].get<double>(), 3));
  }
  return {ok, "analytic beta for delta=1..4 [" + fits + "] vs [-0.5,0,0.5,1]; log-KDE beta for delta=1,3 [" +
                signs + "]"};
}

// --- 7 ----------------------------------------------------------------------

Verdict triangulation()
{
  const auto p = cir::cir_params(1.0, 1.0, 1.0, 1.0, 1.0);
  verify::CrossValidationOptions o;
  o.l1_tolerance = l1_tol;
  o.sup_tolerance = sup_tol;
  const auto r = verify::cross_validate(p, 100000, {1, 2}, o);
  const double l1 = r.fits.at(0).value;
  const double sup = r.fits.at(1).value;

  const auto xi = density::symmetric_grid(8.0, 0.01);
  std::vector<std::complex<double>> cf(xi.size());
  for (std::size_t j = 0; j < xi.size(); ++j)
    cf[j] = std::exp(-0.5 * xi[j] * xi[j]);
  const auto grid = numerics::linspace(-5.0, 5.0, 201);
  const auto inv = density::invert_cf(1.0, cf, xi, grid, 0);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double exact = std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2.0 * M_PI);
    worst = std::max(worst, std::fabs(inv.values[i] - exact));
  }
  return {l1 <= l1_tol && sup <= sup_tol && worst <= gaussian_tol,
          "L1(analytic, log-KDE)=" + fmt(l1, 3) + " sup(analytic, fourier-local)/peak=" + fmt(sup, 3) +
            " gaussian pair sup error=" + fmt(worst, 3)};
}

// --- 8 ----------------------------------------------------------------------

Verdict bound_structure()
{
  struct Case
  {
    int m, k;
    double q, q_bar;
  };
  bool ok = true;
  std::string parts;
  for (const Case c : {Case{1, 3, 2.0, 0.0}, Case{1, 5, 2.0, 0.0}, Case{2, 3, 1.0, 1.0}}) {
    bounds::PolynomialRegime reg;
    reg.m = c.m;
    reg.k = c.k;
    reg.q = c.q;
    reg.q_bar = c.q_bar;
    const double y = 1e6;
    const auto v = bounds::polynomial_regime_bounds(reg, y);
    const double ratio = v.lambda_k.log / std::log(y);
    const auto v5 = bounds::polynomial_regime_bounds(reg, 1e5);
    const double local = (v.lambda_k.log - v5.lambda_k.log) / std::log(10.0);
    const bool pass = std::fabs(ratio / v.q_prime_k - 1.0) <= slope_tol;
    ok = ok && pass;
    parts += (parts.empty() ? "" : "; ") + std::string("(") + std::to_string(c.m) + "," +
             std::to_string(c.k) + "," + fmt(c.q) + "," + fmt(c.q_bar) + ") " + fmt(ratio, 6) +
             " vs q'=" + fmt(v.q_prime_k, 6) + (pass ? "" : " x");
    std::cerr << "  (" << c.m << "," << c.k << "," << c.q << "," << c.q_bar
              << ") log-log slope between 1e5 and 1e6: " << local << "\n";
  }
  return {ok, "log Lambda / log|y0| at 1e6: " + parts};
}

// --- 9 ----------------------------------------------------------------------

std::vector<std::string> read_all(const std::vector<std::string>& paths)
{
  std::vector<std::string> out;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.push_back(ss.str());
  }
  return out;
}

Verdict determinism()
{
  const std::vector<json> tasks = {
    {{"command", "bounds"}},
    {{"command", "cir-density"}, {"form", "bessel"}},
    {{"command", "classify"}},
    {{"command", "simulate"}, {"write_paths", true}},
    {{"command", "estimate"}, {"method", "fourier-local"}},
    {{"command", "estimate"}, {"method", "kde-log"}, {"scheme", "exact"}},
    {{"command", "verify-tail"}, {"source", "mc"}},
    {{"command", "verify-zero"}, {"source", "mc"}},
    {{"command", "report"}, {"xval_samples", 20000}},
  };
  const char* saved = std::getenv("SQRTDIFF_THREADS");
  const std::string restore = saved ? saved : "";
  int identical = 0;
  std::size_t files = 0;
  std::string bad;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const json cfg = {{"model", {{"a", 1.0}, {"b", 1.0}, {"gamma", 1.0}, {"alpha", 0.5}}},
                      {"task", tasks[i]},
                      {"numerics", {{"steps", 64}, {"paths", 20000}}},
                      {"seed", 42},
                      {"output", (artifact_root() / "c9" / std::to_string(i)).string()}};
    std::vector<std::vector<std::string>> runs;
    std::vector<std::string> names;
    for (const char* threads : {"1", "1", "8", "8"}) {
      setenv("SQRTDIFF_THREADS", threads, 1);
      const auto r = run_cli(cfg);
      if (names.empty())
        names = r.artifacts;
      runs.push_back(r.artifacts == names ? read_all(r.artifacts) : std::vector<std::string>{});
    }
    const bool same = std::all_of(runs.begin(), runs.end(), [&](const auto& r) { return r == runs[0]; }) &&
                      !runs[0].empty();
    identical += same;
    files += names.size();
    if (!same)
      bad += " " + tasks[i]["command"].get<std::string>();
  }
  if (saved)
    setenv("SQRTDIFF_THREADS", restore.c_str(), 1);
  else
    unsetenv("SQRTDIFF_THREADS");
  return {identical == static_cast<int>(tasks.size()),
          std::to_string(identical) + "/" + std::to_string(tasks.size()) + " runs (" +
            std::to_string(files) + " artifacts) byte-identical over 2 reruns x SQRTDIFF_THREADS {1,8}" + bad};
}

struct Criterion
{
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict()> check;
};

} // namespace

int main(int argc, char** argv)
{
  const std::vector<Criterion> all = {
    {1, "constant-calculus exactness", 1.0, constant_calculus},
    {2, "oracle integrity", 30.0, oracle_integrity},
    {3, "simulation consistency", 120.0, simulation_consistency},
    {4, "boundary classification", 60.0, boundary_classification},
    {5, "tail claim", 300.0, tail_claim},
    {6, "zero claim", 180.0, zero_claim},
    {7, "estimator triangulation", 180.0, triangulation},
    {8, "bound structure", 10.0, bound_structure},
    {9, "determinism", 120.0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i)
    wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s  %d  %s: %s [%.1f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                v.summary.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed;
}
