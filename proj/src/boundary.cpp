#include "sqrtdiff/boundary.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sqrtdiff::boundary {

namespace {

constexpr double panel_width = 0.17328679513998632; // log(2) / 4
constexpr double quad_rel_tol = 1e-10;

struct NonFiniteIntegrand
{
  double v;
};

} // namespace

std::string to_string(Classification c)
{
  switch (c) {
    case Classification::unattainable: return "unattainable";
    case Classification::attainable: return "attainable";
    case Classification::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string to_string(Rule r)
{
  switch (r) {
    case Rule::none: return "none";
    case Rule::s1_prime_route: return "(s1)'-route";
    case Rule::s1_s2_route: return "(s1)+(s2)-route";
    case Rule::scale_limit: return "scale-limit";
    case Rule::feller_constant: return "feller-constant";
  }
  return "none";
}

ScaleFunction::ScaleFunction(const model::CoefficientSet& c, double cpoint)
  : c_(c)
  , cpoint_(cpoint)
  , log_c_(std::log(cpoint))
{
  if (!(cpoint > 0.0) || !std::isfinite(cpoint))
    throw Error(ErrorKind::invalid_argument, "scale function needs cpoint > 0");
  inner_cache_[0] = 0.0;
  outer_cache_[0] = 0.0;
}

double ScaleFunction::knot(int k) const
{
  return log_c_ + k * panel_width;
}

int ScaleFunction::knot_toward_c(double u) const
{
  const double pos = (u - log_c_) / panel_width;
  const double nearest = std::round(pos);
  if (std::fabs(pos - nearest) < 1e-9)
    return static_cast<int>(nearest);
  return static_cast<int>(std::trunc(pos));
}

// 2 drift(z) / diffusion(z)^2 dz with z = e^v.
double ScaleFunction::inner_integrand(double v) const
{
  const double z = std::exp(v);
  const double g = c_.gamma(z);
  const double value = 2.0 * (c_.a(z) - c_.b(z) * z) / (g * g * std::pow(z, 2.0 * c_.alpha)) * z;
  if (!std::isfinite(value))
    throw NonFiniteIntegrand{v};
  return value;
}

namespace {

template <class F>
double panel_integral(F&& f, double lo, double hi)
{
  if (lo == hi)
    return 0.0;
  try {
    return numerics::integrate(f, lo, hi, quad_rel_tol).value;
  } catch (const NonFiniteIntegrand& bad) {
    std::ostringstream msg;
    msg << "inner integrand is not finite at z = " << std::exp(bad.v) << " on the panel ["
        << std::exp(std::min(lo, hi)) << ", " << std::exp(std::max(lo, hi)) << "]";
    throw Error(ErrorKind::quadrature_failure, msg.str());
  }
}

} // namespace

double ScaleFunction::inner_at_knot(int k)
{
  auto it = inner_cache_.find(k);
  if (it != inner_cache_.end())
    return it->second;
  const int step = k > 0 ? 1 : -1;
  // Walk outward from the nearest cached knot toward k.
  int j = k;
  while (inner_cache_.find(j) == inner_cache_.end())
    j -= step;
  double value = inner_cache_[j];
  auto g = [this](double v) { return inner_integrand(v); };
  while (j != k) {
    value += panel_integral(g, knot(j), knot(j + step));
    j += step;
    inner_cache_[j] = value;
  }
  return value;
}

double ScaleFunction::inner_from_knot(int k, double u)
{
  auto g = [this](double v) { return inner_integrand(v); };
  return inner_at_knot(k) + panel_integral(g, knot(k), u);
}

double ScaleFunction::inner(double y)
{
  if (!(y > 0.0))
    throw Error(ErrorKind::invalid_argument, "scale function needs y > 0");
  const double u = std::log(y);
  return inner_from_knot(knot_toward_c(u), u);
}

double ScaleFunction::outer_panel(int k, double u)
{
  auto f = [this, k](double w) { return std::exp(-inner_from_knot(k, w) + w); };
  return panel_integral(f, knot(k), u);
}

double ScaleFunction::outer_at_knot(int k)
{
  auto it = outer_cache_.find(k);
  if (it != outer_cache_.end())
    return it->second;
  const int step = k > 0 ? 1 : -1;
  int j = k;
  while (outer_cache_.find(j) == outer_cache_.end())
    j -= step;
  double value = outer_cache_[j];
  while (j != k) {
    value += outer_panel(j, knot(j + step));
    j += step;
    outer_cache_[j] = value;
  }
  return value;
}

double ScaleFunction::operator()(double x)
{
  if (!(x > 0.0))
    throw Error(ErrorKind::invalid_argument, "scale function needs x > 0");
  const double u = std::log(x);
  const int k = knot_toward_c(u);
  return outer_at_knot(k) + outer_panel(k, u);
}

double scale_function(const model::CoefficientSet& c, double cpoint, double x)
{
  ScaleFunction p(c, cpoint);
  return p(x);
}

LStarEstimate estimate_l_star(const model::CoefficientSet& c)
{
  LStarEstimate est;
  for (int j = 0; j <= 40; ++j) {
    const double x = std::ldexp(1.0, -j);
    const double g = c.gamma(x);
    est.grid.push_back(x);
    est.ratios.push_back(2.0 * c.a(x) / (g * g));
  }
  const auto tail_begin = est.ratios.end() - 10;
  const auto [lo, hi] = std::minmax_element(tail_begin, est.ratios.end());
  est.value = *lo;
  est.stable = (*hi - *lo) <= 1e-3 * std::max(1.0, std::fabs(*lo));
  est.exceeds_one = est.value > 1.0;
  return est;
}

double lamperti(double x, double alpha, double gamma_sup)
{
  if (!(gamma_sup > 0.0) || !(alpha >= 0.5 && alpha < 1.0) || !(x >= 0.0))
    throw Error(ErrorKind::invalid_argument,
                "lamperti needs x >= 0, gamma_sup > 0 and alpha in [0.5, 1)");
  return std::pow(x, 1.0 - alpha) / (gamma_sup * (1.0 - alpha));
}

namespace {

enum class Limit
{
  divergent,
  convergent,
  undecided
};

Limit scale_limit(const std::vector<std::pair<double, double>>& samples,
                  const ScaleLimitRule& rule,
                  std::vector<std::string>& notes)
{
  const std::size_t n = samples.size();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i)
    mag[i] = std::fabs(samples[i].second);

  if (std::isnan(mag.back())) {
    notes.push_back("p_c is NaN near 0");
    return Limit::undecided;
  }
  if (std::isinf(mag.back())) {
    notes.push_back("p_c overflows near 0 (exp of the inner integral exceeds double range)");
    return Limit::divergent;
  }

  bool growing = mag.back() > rule.divergence_threshold;
  for (std::size_t i = n - rule.growth_points; growing && i < n; ++i)
    growing = mag[i] >= rule.growth_factor * mag[i - 1];
  if (growing)
    return Limit::divergent;

  std::vector<double> inc;
  for (std::size_t i = 1; i < n; ++i)
    inc.push_back(std::fabs(samples[i].second - samples[i - 1].second));
  std::vector<double> ratios;
  for (std::size_t i = inc.size() - rule.ratio_points; i < inc.size(); ++i)
    ratios.push_back(inc[i - 1] > 0.0 ? inc[i] / inc[i - 1] : 0.0);
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  std::ostringstream msg;
  msg << "last increment ratios in [" << *lo << ", " << *hi << "], |p_c(2^-40)| = " << mag.back();
  notes.push_back(msg.str());
  if (*hi <= rule.convergence_ratio && *hi - *lo <= rule.ratio_spread)
    return Limit::convergent;
  return Limit::undecided;
}

} // namespace

BoundaryReport classify_zero_boundary(const model::CoefficientSet& c,
                                      double cpoint,
                                      const ScaleLimitRule& rule)
{
  BoundaryReport report;
  report.cpoint = cpoint;

  std::vector<double> grid;
  for (int j = 10; j >= 0; --j)
    grid.push_back(std::ldexp(1.0, -j));
  auto growth = model::check_growth(c, model::uniform_norm_table(1.0, 0), grid);
  for (const char* name : {"s1-prime", "s1", "s2"})
    if (const auto* r = growth.find(name))
      report.conditions.push_back(*r);

  const bool square_root = c.alpha == 0.5;
  if (square_root)
    report.l_star = estimate_l_star(c);

  auto status = [&](const char* name) {
    const auto* r = growth.find(name);
    return r ? r->status : model::Status::inconclusive;
  };

  ScaleFunction p(c, cpoint);
  for (int j = 1; j <= 40; ++j) {
    const double x = std::ldexp(1.0, -j);
    report.p_c_samples.emplace_back(x, p(x));
  }

  if (!square_root && status("s1-prime") == model::Status::pass) {
    report.classification = Classification::unattainable;
    report.rule = Rule::s1_prime_route;
    return report;
  }
  if (square_root && status("s1") == model::Status::pass &&
      status("s2") == model::Status::pass) {
    report.classification = Classification::unattainable;
    report.rule = Rule::s1_s2_route;
    return report;
  }

  switch (scale_limit(report.p_c_samples, rule, report.notes)) {
    case Limit::divergent:
      report.classification = Classification::unattainable;
      report.rule = Rule::scale_limit;
      break;
    case Limit::convergent:
      report.classification = Classification::attainable;
      report.rule = Rule::scale_limit;
      break;
    case Limit::undecided:
      report.classification = Classification::inconclusive;
      report.rule = Rule::none;
      report.notes.push_back("scale-limit test neither diverged nor converged");
      break;
  }
  return report;
}

} // namespace sqrtdiff::boundary
