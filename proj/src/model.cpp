#include "sqrtdiff/model.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"

#include <cmath>
// pchip.hpp in Boost 1.74 calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>

namespace sqrtdiff::model {

std::string to_string(Family family)
{
  switch (family) {
    case Family::constant: return "constant";
    case Family::tabulated: return "tabulated";
    case Family::user: return "user";
  }
  return "user";
}

std::string to_string(Status status)
{
  switch (status) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::inconclusive: return "inconclusive";
    case Status::not_applicable: return "not-applicable";
  }
  return "inconclusive";
}

CoefficientSet constant_coefficients(double a, double b, double gamma, double alpha)
{
  CoefficientSet c;
  c.a = [a](double) { return a; };
  c.b = [b](double) { return b; };
  c.gamma = [gamma](double) { return gamma; };
  c.alpha = alpha;
  c.eta = 0.0;
  auto zero = [](double, int) { return 0.0; };
  c.a_derivative = zero;
  c.b_derivative = zero;
  c.gamma_derivative = zero;
  c.analytic_order = unlimited_order;
  c.family = Family::constant;
  c.a_const = a;
  c.b_const = b;
  c.gamma_const = gamma;
  return c;
}

namespace {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

struct Interpolant
{
  std::shared_ptr<Pchip> spline;
  double lo = 0.0;
  double hi = 0.0;

  double value(double x) const { return (*spline)(std::clamp(x, lo, hi)); }
  double prime(double x) const
  {
    if (x < lo || x > hi)
      return 0.0;
    return spline->prime(x);
  }
};

Interpolant make_interpolant(const std::vector<double>& knots, const std::vector<double>& values)
{
  Interpolant out;
  out.lo = knots.front();
  out.hi = knots.back();
  out.spline = std::make_shared<Pchip>(std::vector<double>(knots), std::vector<double>(values));
  return out;
}

} // namespace

CoefficientSet tabulated_coefficients(TabulatedData data, double alpha, double eta)
{
  const std::size_t n = data.knots.size();
  if (n < 4 || data.a.size() != n || data.b.size() != n || data.gamma.size() != n)
    throw Error(ErrorKind::validation_error,
                "tabulated family needs at least 4 knots and equal-length a, b, gamma arrays");
  if (!std::is_sorted(data.knots.begin(), data.knots.end()) ||
      std::adjacent_find(data.knots.begin(), data.knots.end()) != data.knots.end())
    throw Error(ErrorKind::validation_error, "tabulated knots must be strictly increasing");

  const auto ia = make_interpolant(data.knots, data.a);
  const auto ib = make_interpolant(data.knots, data.b);
  const auto ig = make_interpolant(data.knots, data.gamma);

  CoefficientSet c;
  c.a = [ia](double x) { return ia.value(x); };
  c.b = [ib](double x) { return ib.value(x); };
  c.gamma = [ig](double x) { return ig.value(x); };
  c.a_derivative = [ia](double x, int) { return ia.prime(x); };
  c.b_derivative = [ib](double x, int) { return ib.prime(x); };
  c.gamma_derivative = [ig](double x, int) { return ig.prime(x); };
  c.analytic_order = 1;
  c.alpha = alpha;
  c.eta = eta;
  c.family = Family::tabulated;
  c.table = std::move(data);
  return c;
}

CoefficientSet user_coefficients(ScalarFn a, ScalarFn b, ScalarFn gamma, double alpha, double eta)
{
  CoefficientSet c;
  c.a = std::move(a);
  c.b = std::move(b);
  c.gamma = std::move(gamma);
  c.alpha = alpha;
  c.eta = eta;
  c.analytic_order = 0;
  c.family = Family::user;
  return c;
}

void validate(const CoefficientSet& c)
{
  if (!(c.alpha >= 0.5 && c.alpha < 1.0))
    throw Error(ErrorKind::validation_error, "alpha must lie in [0.5, 1)");
  if (!(c.eta >= 0.0))
    throw Error(ErrorKind::validation_error, "eta must be >= 0");
  if (!c.a || !c.b || !c.gamma)
    throw Error(ErrorKind::validation_error, "coefficient closures a, b, gamma are required");
  if (!(c.a(0.0) >= 0.0))
    throw Error(ErrorKind::validation_error, "a(0) must be >= 0");
  for (double x : numerics::logspace(1e-8, 100.0, 200)) {
    const double g = c.gamma(x);
    if (!(g * g > 0.0) || !std::isfinite(g)) {
      std::ostringstream msg;
      msg << "gamma(x)^2 must be > 0 for x > 0; fails at x = " << x;
      throw Error(ErrorKind::validation_error, msg.str());
    }
  }
}

Coefficients eval_coefficients(const CoefficientSet& c, double x)
{
  if (!(x >= 0.0))
    throw Error(ErrorKind::invalid_argument, "eval_coefficients needs x >= 0");
  Coefficients out;
  out.drift = c.a(x) - c.b(x) * x;
  out.diffusion = x == 0.0 ? 0.0 : c.gamma(x) * std::pow(x, c.alpha);
  if (!std::isfinite(out.drift) || !std::isfinite(out.diffusion)) {
    std::ostringstream msg;
    msg << "coefficients are not finite at x = " << x;
    throw Error(ErrorKind::non_finite, msg.str());
  }
  return out;
}

double finite_difference(const ScalarFn& f, double x, int k)
{
  // Fourth-order central stencils; offsets -3..3.
  static constexpr std::array<std::array<double, 7>, 4> stencil{{
    {0.0, 1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12, 0.0},
    {0.0, -1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12, 0.0},
    {1.0 / 8, -1.0, 13.0 / 8, 0.0, -13.0 / 8, 1.0, -1.0 / 8},
    {-1.0 / 6, 2.0, -13.0 / 2, 28.0 / 3, -13.0 / 2, 2.0, -1.0 / 6},
  }};
  if (k == 0)
    return f(x);
  if (k < 0 || k > 4)
    throw Error(ErrorKind::missing_derivatives,
                "finite differences are available for orders 1..4 only");
  double h = k == 1 ? std::max(1e-6, 1e-6 * std::fabs(x))
                    : std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (k + 4)) *
                        std::max(1.0, std::fabs(x));
  const auto& w = stencil[k - 1];
  double acc = 0.0;
  for (int i = -3; i <= 3; ++i) {
    const double wi = w[i + 3];
    if (wi != 0.0)
      acc += wi * f(x + i * h);
  }
  return acc / std::pow(h, k);
}

namespace {

// (alpha)_j x^(alpha - j): j-th derivative of x^alpha.
double power_derivative(double alpha, double x, int j)
{
  double coef = 1.0;
  for (int i = 0; i < j; ++i)
    coef *= alpha - i;
  return coef * std::pow(x, alpha - j);
}

double binomial(int n, int k)
{
  double r = 1.0;
  for (int i = 1; i <= k; ++i)
    r = r * (n - k + i) / i;
  return r;
}

double coefficient_derivative(const ScalarFn& f, const DerivativeFn& df, double x, int j)
{
  return j == 0 ? f(x) : df(x, j);
}

void require_order(const CoefficientSet& c, int k, bool allow_fd)
{
  if (k > c.analytic_order && !allow_fd) {
    std::ostringstream msg;
    msg << "order " << k << " exceeds the available analytic derivatives ("
        << c.analytic_order << ") and finite differencing is disabled";
    throw Error(ErrorKind::missing_derivatives, msg.str());
  }
}

} // namespace

double drift_derivative(const CoefficientSet& c, double x, int k, bool allow_fd)
{
  if (k == 0)
    return c.a(x) - c.b(x) * x;
  require_order(c, k, allow_fd);
  if (k <= c.analytic_order) {
    const double bk = coefficient_derivative(c.b, c.b_derivative, x, k);
    const double bk1 = coefficient_derivative(c.b, c.b_derivative, x, k - 1);
    return c.a_derivative(x, k) - (bk * x + k * bk1);
  }
  const ScalarFn drift = [&c](double z) { return c.a(z) - c.b(z) * z; };
  return finite_difference(drift, x, k);
}

double diffusion_derivative(const CoefficientSet& c, double x, int k, bool allow_fd)
{
  if (k == 0)
    return x == 0.0 ? 0.0 : c.gamma(x) * std::pow(x, c.alpha);
  require_order(c, k, allow_fd);
  if (k <= c.analytic_order) {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) {
      const double gj = coefficient_derivative(c.gamma, c.gamma_derivative, x, j);
      if (gj != 0.0)
        acc += binomial(k, j) * gj * power_derivative(c.alpha, x, k - j);
    }
    return acc;
  }
  const ScalarFn diffusion = [&c](double z) {
    return z <= 0.0 ? 0.0 : c.gamma(z) * std::pow(z, c.alpha);
  };
  return finite_difference(diffusion, x, k);
}

// --- norm tables ------------------------------------------------------------

double NormTable::drift_norm(int k, Ball ball) const
{
  const auto b = static_cast<std::size_t>(ball);
  if (b >= drift.size() || k < 0 || static_cast<std::size_t>(k) >= drift[b].size())
    throw Error(ErrorKind::missing_norm, "norm table lacks drift order " + std::to_string(k));
  return drift[b][k];
}

double NormTable::diffusion_norm(int k, Ball ball) const
{
  const auto b = static_cast<std::size_t>(ball);
  if (b >= diffusion.size() || k < 0 || static_cast<std::size_t>(k) >= diffusion[b].size())
    throw Error(ErrorKind::missing_norm, "norm table lacks diffusion order " + std::to_string(k));
  return diffusion[b][k];
}

namespace {

// sup |f^(j)| over the sampled points, j = 0..k_max.
std::vector<double> sampled_sups(const std::vector<double>& points,
                                 int k_max,
                                 const std::function<double(double, int)>& deriv)
{
  std::vector<double> out(k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    double sup = 0.0;
    for (double x : points) {
      const double v = std::fabs(deriv(x, k));
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "derivative of order " << k << " is not finite at x = " << x;
        throw Error(ErrorKind::non_finite, msg.str());
      }
      sup = std::max(sup, v);
    }
    out[k] = sup;
  }
  return out;
}

// 1 + sum_{j<=k} sups[j]
std::vector<double> cumulative_norms(const std::vector<double>& sups)
{
  std::vector<double> out(sups.size());
  double acc = 1.0;
  for (std::size_t k = 0; k < sups.size(); ++k) {
    acc += sups[k];
    out[k] = acc;
  }
  return out;
}

} // namespace

NormTable local_norms(const CoefficientSet& c,
                      double y0,
                      double R,
                      int k_max,
                      const NormOptions& options)
{
  if (!(R > 0.0 && R <= 1.0))
    throw Error(ErrorKind::invalid_argument, "local_norms needs R in (0, 1]");
  if (k_max < 0)
    throw Error(ErrorKind::invalid_argument, "local_norms needs k_max >= 0");
  if (y0 - 5.0 * R <= c.eta) {
    std::ostringstream msg;
    msg << "ball [" << y0 - 5.0 * R << ", " << y0 + 5.0 * R
        << "] meets the singular set [0, " << c.eta << "]";
    throw Error(ErrorKind::ball_touches_singularity, msg.str());
  }
  require_order(c, k_max, options.allow_finite_differences);

  NormTable table;
  table.y0 = y0;
  table.R = R;
  table.k_max = k_max;
  const bool fd = options.allow_finite_differences;
  auto drift = [&](double x, int k) { return drift_derivative(c, x, k, fd); };
  auto diffusion = [&](double x, int k) { return diffusion_derivative(c, x, k, fd); };

  // The balls are nested, so each sup is at least the one on the smaller ball.
  std::vector<double> drift_sup(k_max + 1, 0.0);
  std::vector<double> diffusion_sup(k_max + 1, 0.0);
  for (double mult : {1.0, 3.0, 5.0}) {
    const auto points = numerics::linspace(y0 - mult * R, y0 + mult * R,
                                           static_cast<std::size_t>(options.points_per_ball));
    const auto ds = sampled_sups(points, k_max, drift);
    const auto ss = sampled_sups(points, k_max, diffusion);
    for (int k = 0; k <= k_max; ++k) {
      drift_sup[k] = std::max(drift_sup[k], ds[k]);
      diffusion_sup[k] = std::max(diffusion_sup[k], ss[k]);
    }
    table.drift.push_back(cumulative_norms(drift_sup));
    table.diffusion.push_back(cumulative_norms(diffusion_sup));
    if (mult == 3.0) {
      double inf_sq = std::numeric_limits<double>::infinity();
      for (double x : points) {
        const double s = diffusion(x, 0);
        inf_sq = std::min(inf_sq, s * s);
      }
      table.c_star = std::min(1.0, inf_sq);
    }
  }
  table.lower_bound = true;
  return table;
}

void global_norms(NormTable& table,
                  const CoefficientSet& c,
                  double lo,
                  double hi,
                  const NormOptions& options)
{
  if (!(lo > c.eta) || !(hi > lo))
    throw Error(ErrorKind::invalid_argument, "global_norms needs eta < lo < hi");
  const bool fd = options.allow_finite_differences;
  const auto points = numerics::linspace(lo, hi, static_cast<std::size_t>(options.points_per_ball));
  table.global_drift = cumulative_norms(sampled_sups(
    points, table.k_max, [&](double x, int k) { return drift_derivative(c, x, k, fd); }));
  table.global_diffusion = cumulative_norms(sampled_sups(
    points, table.k_max, [&](double x, int k) { return diffusion_derivative(c, x, k, fd); }));
}

NormTable uniform_norm_table(double value, int k_max, double R)
{
  NormTable table;
  table.R = R;
  table.k_max = k_max;
  table.drift.assign(3, std::vector<double>(k_max + 1, value));
  table.diffusion.assign(3, std::vector<double>(k_max + 1, value));
  table.c_star = 1.0;
  table.lower_bound = false;
  return table;
}

// --- growth and boundary-side conditions --------------------------------------

const ConditionResult* GrowthReport::find(const std::string& name) const
{
  for (const auto& c : conditions)
    if (c.name == name)
      return &c;
  return nullptr;
}

ConditionResult integrability_at_zero(const ScalarFn& f, double z0)
{
  ConditionResult out;
  constexpr int panels = 40;
  std::vector<double> mass;
  mass.reserve(panels);
  for (int j = 0; j < panels; ++j) {
    const double hi = z0 * std::ldexp(1.0, -j);
    const double lo = 0.5 * hi;
    const double v = numerics::integrate(f, lo, hi, 1e-10).value;
    if (!std::isfinite(v)) {
      out.status = Status::fail;
      out.witnesses.push_back(lo);
      out.note = "panel integral is not finite";
      return out;
    }
    mass.push_back(std::fabs(v));
  }
  bool all_small = true;
  bool all_large = true;
  for (int j = panels - 10; j < panels; ++j) {
    const double ratio = mass[j - 1] > 0.0 ? mass[j] / mass[j - 1] : 0.0;
    all_small = all_small && ratio <= 0.95;
    all_large = all_large && ratio >= 0.999;
  }
  double total = 0.0;
  for (double m : mass)
    total += m;
  out.value = total;
  if (all_small) {
    out.status = Status::pass;
    out.note = "dyadic panel masses decay geometrically";
  } else if (all_large) {
    out.status = Status::fail;
    out.witnesses.push_back(z0);
    out.note = "dyadic panel masses do not decay: integral diverges at 0+";
  } else {
    out.status = Status::inconclusive;
    out.note = "dyadic panel masses neither decay nor stall";
  }
  return out;
}

GrowthReport check_growth(const CoefficientSet& c,
                          const NormTable& table,
                          const std::vector<double>& grid)
{
  if (grid.empty() || !(grid.front() > 0.0) || !std::is_sorted(grid.begin(), grid.end()))
    throw Error(ErrorKind::invalid_argument, "check_growth needs a nonempty, positive, sorted grid");

  GrowthReport report;
  report.grid = grid;

  // (H4) polynomial growth of derivatives
  {
    ConditionResult r;
    r.name = "H4-growth";
    if (table.Ck.empty()) {
      r.status = Status::not_applicable;
      r.note = "no growth constants C_k in the norm table";
    } else {
      for (std::size_t k = 1; k <= table.Ck.size(); ++k) {
        for (double y : grid) {
          if (y <= c.eta)
            continue;
          const double lhs = std::fabs(drift_derivative(c, y, static_cast<int>(k))) +
                             std::fabs(diffusion_derivative(c, y, static_cast<int>(k)));
          if (!(lhs <= table.Ck[k - 1] * (1.0 + std::pow(std::fabs(y), table.q))))
            r.witnesses.push_back(y);
        }
      }
      std::sort(r.witnesses.begin(), r.witnesses.end());
      r.witnesses.erase(std::unique(r.witnesses.begin(), r.witnesses.end()), r.witnesses.end());
      r.status = r.witnesses.empty() ? Status::pass : Status::fail;
    }
    report.conditions.push_back(std::move(r));
  }

  // (H4) polynomial ellipticity
  {
    ConditionResult r;
    r.name = "H4-elliptic";
    for (double y : grid) {
      if (y <= c.eta)
        continue;
      const double s = diffusion_derivative(c, y, 0);
      if (!(s * s >= table.C0 * std::pow(std::fabs(y), -table.q_bar)))
        r.witnesses.push_back(y);
    }
    r.status = r.witnesses.empty() ? Status::pass : Status::fail;
    report.conditions.push_back(std::move(r));
  }

  const double z0 = grid.front();
  const bool square_root = c.alpha == 0.5;

  // (s1)'
  {
    ConditionResult r;
    r.name = "s1-prime";
    if (square_root) {
      r.status = Status::not_applicable;
      r.note = "alpha = 1/2 uses (s1) and (s2)";
    } else if (!(c.a(0.0) > 0.0)) {
      r.status = Status::fail;
      r.witnesses.push_back(0.0);
      r.note = "a(0) must be > 0";
    } else {
      const double e = 2.0 * c.alpha - 1.0;
      r = integrability_at_zero(
        [&c, e](double z) {
          const double g = c.gamma(z);
          return 1.0 / (g * g * std::pow(z, e));
        },
        z0);
      r.name = "s1-prime";
    }
    report.conditions.push_back(std::move(r));
  }

  // (s1)
  {
    ConditionResult r;
    r.name = "s1";
    if (!square_root) {
      r.status = Status::not_applicable;
      r.note = "alpha > 1/2 uses (s1)'";
    } else {
      r = integrability_at_zero(
        [&c](double z) {
          const double g = c.gamma(z);
          return 1.0 / (g * g);
        },
        z0);
      r.name = "s1";
    }
    report.conditions.push_back(std::move(r));
  }

  // (s2)
  {
    ConditionResult r;
    r.name = "s2";
    if (!square_root) {
      r.status = Status::not_applicable;
      r.note = "alpha > 1/2 uses (s1)'";
    } else {
      auto ratio = [&c](double x) {
        const double g = c.gamma(x);
        return 2.0 * c.a(x) / (g * g);
      };
      for (int j = 40; j >= 1; --j) {
        const double x = z0 * std::ldexp(1.0, -j);
        if (!(ratio(x) >= 1.0))
          r.witnesses.push_back(x);
      }
      std::optional<double> x_bar;
      for (double x : grid) {
        if (ratio(x) >= 1.0) {
          x_bar = x;
        } else {
          r.witnesses.push_back(x);
          break;
        }
      }
      if (r.witnesses.empty() || (x_bar && r.witnesses.front() > *x_bar)) {
        r.status = x_bar ? Status::pass : Status::fail;
        r.value = x_bar;
        r.witnesses.clear();
      } else {
        r.status = Status::fail;
      }
      if (r.status == Status::fail && r.witnesses.empty())
        r.witnesses.push_back(z0);
    }
    report.conditions.push_back(std::move(r));
  }

  // liminf_{x->inf} b(x) x^(1-alpha) > -inf
  {
    ConditionResult r;
    r.name = "b-condition";
    constexpr double threshold = -1e6;
    double running = std::numeric_limits<double>::infinity();
    double witness = z0;
    for (int j = 31; j <= 40; ++j) {
      const double x = z0 * std::ldexp(1.0, j);
      const double v = c.b(x) * std::pow(x, 1.0 - c.alpha);
      if (v < running) {
        running = v;
        witness = x;
      }
    }
    r.value = running;
    if (running > threshold) {
      r.status = Status::pass;
    } else {
      r.status = Status::fail;
      r.witnesses.push_back(witness);
    }
    r.note = "running inf of b(x) x^(1-alpha) over the last 10 points of x_min 2^j, j = 0..40";
    report.conditions.push_back(std::move(r));
  }

  return report;
}

} // namespace sqrtdiff::model
