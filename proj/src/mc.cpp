#include "sqrtdiff/mc.hpp"
#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace sqrtdiff::mc {

std::string to_string(Scheme scheme)
{
  return scheme == Scheme::exact_cir ? "exact-cir" : "full-truncation-euler";
}

Scheme parse_scheme(std::string_view name)
{
  if (name == "full-truncation-euler" || name == "euler")
    return Scheme::full_truncation_euler;
  if (name == "exact-cir" || name == "exact")
    return Scheme::exact_cir;
  throw Error(ErrorKind::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t path_index)
{
  constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
  return numerics::mix64(numerics::mix64(master_seed) + golden * path_index);
}

namespace {

// Running summaries of one path.
struct Tracker
{
  double min_raw = std::numeric_limits<double>::infinity();
  double max_pos = 0.0;
  double wmin = std::numeric_limits<double>::infinity();
  double wmax = -std::numeric_limits<double>::infinity();

  void observe(double x, bool in_window)
  {
    const double pos = std::max(x, 0.0);
    min_raw = std::min(min_raw, x);
    max_pos = std::max(max_pos, pos);
    if (in_window) {
      wmin = std::min(wmin, pos);
      wmax = std::max(wmax, pos);
    }
  }
};

// One transition X -> X' over a step of length dt.
class Stepper
{
public:
  Stepper(const model::CoefficientSet& c, Scheme scheme, double dt)
    : c_(c)
    , scheme_(scheme)
    , dt_(dt)
    , sqrt_dt_(std::sqrt(dt))
  {
    constant_ = c.family == model::Family::constant;
    if (scheme == Scheme::exact_cir && c.gamma_const > 0.0) {
      // Transition from X: L * ncx2(delta, kappa X).
      const auto p = cir::cir_params(c.a_const, c.b_const, c.gamma_const, 1.0, dt);
      L_ = p.L;
      delta_ = p.delta;
      kappa_ = p.zeta;
    }
    decay_ = std::exp(-c.b_const * dt);
    drift_frac_ = c.b_const == 0.0 ? dt : -std::expm1(-c.b_const * dt) / c.b_const;
  }

  double step(double x, std::mt19937_64& rng, std::normal_distribution<double>& normal) const
  {
    if (scheme_ == Scheme::exact_cir) {
      if (c_.gamma_const == 0.0)
        return x * decay_ + c_.a_const * drift_frac_;
      return L_ * cir::sample_ncx2(delta_, kappa_ * std::max(x, 0.0), rng);
    }
    const double xp = std::max(x, 0.0);
    const double dw = sqrt_dt_ * normal(rng);
    if (constant_) {
      const double power = c_.alpha == 0.5 ? std::sqrt(xp) : std::pow(xp, c_.alpha);
      return x + (c_.a_const - c_.b_const * xp) * dt_ + c_.gamma_const * power * dw;
    }
    return x + (c_.a(xp) - c_.b(xp) * xp) * dt_ + c_.gamma(xp) * std::pow(xp, c_.alpha) * dw;
  }

private:
  const model::CoefficientSet& c_;
  Scheme scheme_;
  double dt_;
  double sqrt_dt_;
  bool constant_ = false;
  double L_ = 0.0;
  double delta_ = 0.0;
  double kappa_ = 0.0;
  double decay_ = 1.0;
  double drift_frac_ = 0.0;
};

} // namespace

PathEnsemble simulate_paths(const model::CoefficientSet& c, const SimulationOptions& o)
{
  if (o.n_steps < 1 || o.n_paths < 1)
    throw Error(ErrorKind::invalid_argument, "simulate_paths needs n_steps >= 1 and n_paths >= 1");
  if (!(o.x >= 0.0) || !(o.t > 0.0))
    throw Error(ErrorKind::invalid_argument, "simulate_paths needs x >= 0 and t > 0");
  if (o.record_points == 1 || o.record_points < 0)
    throw Error(ErrorKind::invalid_argument, "record_points must be 0 or at least 2");
  if (o.scheme == Scheme::exact_cir &&
      (c.family != model::Family::constant || c.alpha != 0.5)) {
    throw Error(ErrorKind::scheme_mismatch,
                "exact-cir needs the constant coefficient family with alpha = 1/2");
  }

  PathEnsemble e;
  e.n_paths = o.n_paths;
  e.n_steps = o.n_steps;
  e.scheme = o.scheme;
  e.master_seed = o.master_seed;
  e.seed_rule = std::string(seed_rule_id);
  e.x = o.x;
  e.t = o.t;
  const double dt = o.t / o.n_steps;
  e.time_grid.resize(o.n_steps + 1);
  for (int k = 0; k <= o.n_steps; ++k)
    e.time_grid[k] = o.t * k / o.n_steps;

  const double window_start = std::max(o.t - 1.0, 0.5 * o.t);
  e.window_begin = static_cast<int>(std::ceil(window_start / dt - 1e-9));
  e.window_begin = std::clamp(e.window_begin, 0, o.n_steps);

  for (int j = 0; j < o.record_points; ++j) {
    const int k = static_cast<int>(std::llround(static_cast<double>(j) * o.n_steps /
                                                (o.record_points - 1)));
    if (e.record_steps.empty() || e.record_steps.back() != k)
      e.record_steps.push_back(k);
  }
  const std::size_t nrec = e.record_steps.size();
  e.states.assign(o.n_paths * nrec, 0.0);
  e.terminal.assign(o.n_paths, 0.0);
  e.path_min.assign(o.n_paths, 0.0);
  e.path_max.assign(o.n_paths, 0.0);
  e.window_min.assign(o.n_paths, 0.0);
  e.window_max.assign(o.n_paths, 0.0);

  const Stepper stepper(c, o.scheme, dt);
  const unsigned workers = o.workers ? o.workers : numerics::worker_count();

  numerics::parallel_for(o.n_paths, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::mt19937_64 rng(derive_path_seed(o.master_seed, i));
      std::normal_distribution<double> normal(0.0, 1.0);
      Tracker tr;
      double x = o.x;
      std::size_t next_rec = 0;
      for (int k = 0;; ++k) {
        tr.observe(x, k >= e.window_begin);
        if (next_rec < nrec && e.record_steps[next_rec] == k)
          e.states[i * nrec + next_rec++] = x;
        if (k == o.n_steps)
          break;
        x = stepper.step(x, rng, normal);
        if (!std::isfinite(x)) {
          std::ostringstream msg;
          msg << "path " << i << " left the finite range at step " << k + 1;
          throw Error(ErrorKind::non_finite, msg.str());
        }
      }
      e.terminal[i] = x;
      e.path_min[i] = tr.min_raw;
      e.path_max[i] = tr.max_pos;
      e.window_min[i] = tr.wmin;
      e.window_max[i] = tr.wmax;
    }
  });
  return e;
}

namespace {

PathFunctionalResult summarize(const std::vector<double>& values, std::string descriptor)
{
  PathFunctionalResult r;
  r.n_paths = values.size();
  r.descriptor = std::move(descriptor);
  if (values.empty())
    return r;
  r.estimate = numerics::mean(values);
  r.std_error = numerics::sample_std(values) / std::sqrt(static_cast<double>(values.size()));
  return r;
}

} // namespace

PathFunctionalResult estimate_ball_prob(const PathEnsemble& e, double y0, double R)
{
  if (!(R > 0.0 && R <= 1.0))
    throw Error(ErrorKind::invalid_argument, "estimate_ball_prob needs R in (0, 1]");
  const double reach = 3.0 * R;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < e.n_paths; ++i) {
    // distance from y0 to the window range [wmin, wmax]
    const double dist = std::max({e.window_min[i] - y0, y0 - e.window_max[i], 0.0});
    hits += dist <= reach;
  }
  PathFunctionalResult r;
  r.n_paths = e.n_paths;
  r.estimate = static_cast<double>(hits) / e.n_paths;
  r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / e.n_paths);
  std::ostringstream d;
  d << "P(inf_{s in window} |X_s - " << y0 << "| <= " << reach << ")";
  r.descriptor = d.str();
  return r;
}

PathFunctionalResult sup_moment(const PathEnsemble& e, double r, Sign sign, bool allow_nonpositive)
{
  if (!(r > 0.0))
    throw Error(ErrorKind::invalid_argument, "sup_moment needs r > 0");
  std::vector<double> values;
  values.reserve(e.n_paths);
  std::ostringstream d;
  if (sign == Sign::plus) {
    for (double m : e.path_max)
      values.push_back(std::pow(m, r));
    d << "E[(sup_s X_s)^" << r << "]";
    return summarize(values, d.str());
  }
  std::size_t below = 0;
  for (double m : e.path_min) {
    if (m <= positivity_floor) {
      ++below;
      continue;
    }
    values.push_back(std::pow(m, -r));
  }
  const double fraction = static_cast<double>(below) / e.n_paths;
  if (below > 0 && !allow_nonpositive) {
    std::ostringstream msg;
    msg << below << " of " << e.n_paths << " paths reach the positivity floor "
        << positivity_floor;
    throw Error(ErrorKind::nonpositive_path, msg.str());
  }
  d << "E[(sup_s 1/X_s)^" << r << "]";
  auto out = summarize(values, d.str());
  out.below_floor_fraction = fraction;
  return out;
}

PathFunctionalResult terminal_mean(const PathEnsemble& e)
{
  std::vector<double> values(e.terminal.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::max(e.terminal[i], 0.0);
  return summarize(values, "E[max(X_t, 0)]");
}

RefinementReport refine_sup_moment(const model::CoefficientSet& c,
                                   SimulationOptions options,
                                   double r,
                                   Sign sign,
                                   const std::vector<int>& steps,
                                   double tolerance)
{
  if (steps.size() < 2)
    throw Error(ErrorKind::invalid_argument, "refinement needs at least two step counts");
  RefinementReport report;
  options.record_points = 0;
  for (int n : steps) {
    options.n_steps = n;
    const auto e = simulate_paths(c, options);
    report.steps.push_back(n);
    report.results.push_back(sup_moment(e, r, sign, true));
  }
  report.ratio = report.results.back().estimate / report.results.front().estimate;
  report.stable = std::fabs(report.ratio - 1.0) <= tolerance;
  return report;
}

} // namespace sqrtdiff::mc
