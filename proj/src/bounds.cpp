#include "sqrtdiff/bounds.hpp"
#include "sqrtdiff/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sqrtdiff::bounds {

namespace {

// log(exp(a) + exp(b))
double log_add(double a, double b)
{
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (!std::isfinite(hi))
    return hi;
  return hi + std::log1p(std::exp(lo - hi));
}

// log of exp(s^p) where s = t^{1/2} * base; i.e. returns s^p in a way that
// stays total: +inf when s^p overflows.
double log_of_exp_power(double s, double p)
{
  if (s <= 0.0)
    return 0.0;
  const double loglog = p * std::log(s);
  if (loglog > std::log(std::numeric_limits<double>::max()))
    return std::numeric_limits<double>::infinity();
  return std::exp(loglog);
}

void require_positive_time(double t)
{
  if (!(t > 0.0))
    throw Error(ErrorKind::degenerate_time, "time must be > 0");
}

} // namespace

double LogValue::value() const
{
  if (saturated())
    return std::numeric_limits<double>::max();
  return std::exp(log);
}

void validate(const BoundContext& ctx)
{
  if (!(ctx.t > 0.0) || !(ctx.t <= ctx.T))
    throw Error(ErrorKind::invalid_argument, "bound context needs 0 < t <= T");
  if (!(ctx.R > 0.0 && ctx.R <= 1.0))
    throw Error(ErrorKind::invalid_argument, "bound context needs R in (0, 1]");
  if (!(ctx.kappa > 0.0))
    throw Error(ErrorKind::invalid_argument, "bound context needs kappa > 0");
  if (ctx.m < 1 || ctx.d < 1 || ctx.k < 0)
    throw Error(ErrorKind::invalid_argument, "bound context needs m, d >= 1 and k >= 0");
}

BoundContext make_context(double t, double T, double R, int m, int d, int k, double kappa)
{
  BoundContext ctx{t, T, R, m, d, k, kappa, kappa};
  validate(ctx);
  return ctx;
}

Exponentials eval_exponentials(double p, double t, double nB1, double nA1)
{
  if (!(t >= 0.0))
    throw Error(ErrorKind::invalid_argument, "eval_exponentials needs t >= 0");
  const double st = std::sqrt(t);
  Exponentials out;
  out.e_p.log = log_of_exp_power(st * (st * nB1 + nA1), p);
  out.e_p_Z.log = log_of_exp_power(st * (st * (nB1 + nA1 * nA1) + nA1), p);
  return out;
}

LogValue log_K_m(double t, double c_star, int m, double B0, double A1, double A2)
{
  require_positive_time(t);
  if (!(c_star > 0.0))
    throw Error(ErrorKind::invalid_argument, "K_m needs c_star > 0");
  const double first = m * std::log(4.0 / (t * c_star) + 1.0);
  const double inner = std::sqrt(t) * B0 * A2 * A2 * A2 + A1 * A1;
  const double second = inner > 0.0
                          ? -2.0 * (m + 1) * std::log(c_star) + 2.0 * (m + 1) * std::log(inner)
                          : -std::numeric_limits<double>::infinity();
  return LogValue{log_add(0.0, log_add(first, second))};
}

double eval_K_m(double t, double c_star, int m, double B0, double A1, double A2)
{
  require_positive_time(t);
  const double inner = std::sqrt(t) * B0 * A2 * A2 * A2 + A1 * A1;
  return 1.0 + std::pow(4.0 / (t * c_star) + 1.0, m) +
         std::pow(c_star, -2.0 * (m + 1)) * std::pow(inner, 2.0 * (m + 1));
}

std::int64_t phi(int k, int m)
{
  const std::int64_t kk = k + 4;
  return 3 * static_cast<std::int64_t>(m) * kk * kk;
}

Combinatorial eval_combinatorial(int k, int m, double q, double q_bar)
{
  if (k < 1 || m < 1 || q < 0.0 || q_bar < 0.0)
    throw Error(ErrorKind::invalid_argument, "eval_combinatorial needs k, m >= 1 and q, q_bar >= 0");
  Combinatorial out;
  out.phi_k = phi(k, m);
  out.phi_prime_k = 2 * static_cast<std::int64_t>(k + 1) * (m - 1);
  const std::int64_t mk = static_cast<std::int64_t>(m) * k;
  const double first = static_cast<double>(mk) * (q_bar + 4.0) * (m + 1) * static_cast<double>(mk + 3);
  const double second =
    2.0 * q * m * static_cast<double>(phi(static_cast<int>(mk), m) + (mk + 2) * (mk + 2));
  out.q_prime_k = first + second;
  return out;
}

bool BoundValues::any_saturated() const
{
  for (const LogValue* v : {&P_C_m, &C_m, &K_m, &e_8, &e_2pow, &e_Z_lin, &e_Z_2pow, &theta_k, &lambda_k})
    if (v->saturated())
      return true;
  return false;
}

BoundValues eval_local_polys(const model::NormTable& table, const BoundContext& ctx)
{
  using model::Ball;
  validate(ctx);
  const int mk = ctx.m * ctx.k;
  const int needed = std::max({mk + 1, ctx.k + 1, 2});
  if (table.k_max < needed) {
    std::ostringstream msg;
    msg << "norm table holds orders up to " << table.k_max << ", needs " << needed;
    throw Error(ErrorKind::missing_norm, msg.str());
  }
  if (!(table.c_star > 0.0))
    throw Error(ErrorKind::invalid_argument, "norm table has no positive ellipticity constant");

  const double st = std::sqrt(ctx.t);
  auto b = [&](int j) { return table.drift_norm(j, Ball::r5); };
  auto s = [&](int j) { return table.diffusion_norm(j, Ball::r5); };
  auto P = [&](int j) { return st * b(j) + s(j); };

  BoundValues v;
  v.P_0 = P(0);
  v.P_1 = P(1);
  v.P_k = P(ctx.k);
  v.P_sigma_k = s(ctx.k) * P(ctx.k + 1);
  v.P_sigma_mk = s(mk) * P(mk + 1);
  v.P_Z_1 = st * (b(1) + s(1) * s(1)) + s(1);

  const double pc_inner = st * b(0) * std::pow(s(2), 3) + s(1) * s(1);
  v.P_C_m.log = 2.0 * (ctx.m + 1) * std::log(pc_inner);
  // C_m = t^m + 4^m c^{-2(m+1)} (1 + P^C_m)
  const double log_scaled = ctx.m * std::log(4.0) - 2.0 * (ctx.m + 1) * std::log(table.c_star) +
                            log_add(0.0, v.P_C_m.log);
  v.C_m.log = log_add(ctx.m * std::log(ctx.t), log_scaled);

  v.K_m = log_K_m(ctx.t, table.c_star, ctx.m, b(0), s(1), s(2));
  return v;
}

LogValue eval_theta(BoundValues& partial, const BoundContext& ctx)
{
  validate(ctx);
  const int mk = ctx.m * ctx.k;
  const double st = std::sqrt(ctx.t);
  // e_p(t, y0) = exp((t^{1/2} P_1)^p), e^Z_p(t, y0) = exp((t^{1/2} P^Z_1)^p)
  partial.e_8.log = log_of_exp_power(st * partial.P_1, 8.0);
  partial.e_2pow.log = log_of_exp_power(st * partial.P_1, std::ldexp(1.0, mk + 2));
  partial.e_Z_lin.log = log_of_exp_power(st * partial.P_Z_1, 32.0 * ctx.m + 4.0);
  partial.e_Z_2pow.log =
    log_of_exp_power(st * partial.P_Z_1, std::ldexp(1.0, mk + 4) * ctx.m + 4.0);

  const double c_exp = 0.5 * mk * (mk + 3);
  const double p_exp = static_cast<double>(phi(mk, ctx.m) + (mk + 2) * (mk + 2));
  const double e_part = std::max(partial.e_8.log, partial.e_2pow.log) +
                        std::max(partial.e_Z_lin.log, partial.e_Z_2pow.log);
  partial.theta_k.log =
    c_exp * partial.C_m.log + p_exp * std::log(partial.P_sigma_mk) + ctx.gamma_exponent * e_part;
  return partial.theta_k;
}

LogValue eval_lambda(const LogValue& theta_k, double P0, const BoundContext& ctx)
{
  validate(ctx);
  const int mk = ctx.m * ctx.k;
  return LogValue{std::log(ctx.kappa) - mk * std::log(ctx.R) +
                  log_add(mk * std::log(P0), theta_k.log)};
}

double theta_direct(const BoundValues& partial, const BoundContext& ctx)
{
  const int mk = ctx.m * ctx.k;
  const double c_exp = 0.5 * mk * (mk + 3);
  const double p_exp = static_cast<double>(phi(mk, ctx.m) + (mk + 2) * (mk + 2));
  const double e1 = std::max(std::exp(partial.e_8.log), std::exp(partial.e_2pow.log));
  const double e2 = std::max(std::exp(partial.e_Z_lin.log), std::exp(partial.e_Z_2pow.log));
  return std::pow(std::exp(partial.C_m.log), c_exp) * std::pow(partial.P_sigma_mk, p_exp) *
         std::pow(e1, ctx.gamma_exponent) * std::pow(e2, ctx.gamma_exponent);
}

double lambda_direct(double theta_k, double P0, const BoundContext& ctx)
{
  const int mk = ctx.m * ctx.k;
  return ctx.kappa * std::pow(ctx.R, -mk) * (std::pow(P0, mk) + theta_k);
}

BoundValues evaluate(const model::NormTable& table, const BoundContext& ctx)
{
  BoundValues v = eval_local_polys(table, ctx);
  eval_theta(v, ctx);
  v.lambda_k = eval_lambda(v.theta_k, v.P_0, ctx);
  if (ctx.k >= 1) {
    const auto comb = eval_combinatorial(ctx.k, ctx.m, table.q, table.q_bar);
    v.phi_k = comb.phi_k;
    v.phi_prime_k = comb.phi_prime_k;
    v.q_prime_k = comb.q_prime_k;
  }
  return v;
}

double density_upper_bound(double lambda, double P_t_y0, double t, int m, int k_order)
{
  if (!(t > 0.0))
    throw Error(ErrorKind::degenerate_time, "density bound needs t > 0");
  if (!(P_t_y0 >= 0.0 && P_t_y0 <= 1.0))
    throw Error(ErrorKind::invalid_argument, "P_t(y0) must be a probability");
  return P_t_y0 * (1.0 + std::pow(t, -0.5 * m * (2 * k_order + 3))) * lambda;
}

double envelope_constant(double alpha, double gamma_sup)
{
  return std::pow(2.0, 3.0 - 2.0 * alpha) + 2.0 * gamma_sup * gamma_sup * (1.0 - alpha) * (1.0 - alpha);
}

TailEnvelope make_envelope(double alpha, double gamma_sup, double x, double t, double gamma0, double C3)
{
  if (!(gamma0 > 0.0))
    throw Error(ErrorKind::invalid_argument, "gamma0 must be > 0");
  TailEnvelope env;
  env.gamma0 = gamma0;
  env.C = envelope_constant(alpha, gamma_sup);
  env.C3 = C3;
  env.alpha = alpha;
  env.x = x;
  env.t = t;
  return env;
}

double tail_envelope(const TailEnvelope& env, double y, int k_order)
{
  if (!(y > env.x + 1.0))
    throw Error(ErrorKind::out_of_regime, "tail envelope holds only for y > x + 1");
  const double u = std::pow(y - env.x, 2.0 * (1.0 - env.alpha));
  return env.C3 * (1.0 + std::pow(env.t, -0.5 * (2 * k_order + 3))) *
         std::exp(-env.gamma0 * u / (2.0 * env.C * env.t));
}

double envelope_slope(const TailEnvelope& env)
{
  return env.gamma0 / (2.0 * env.C * env.t);
}

double markov_tail_bound(double sup_moment_r, double r, double y)
{
  if (!(std::fabs(y) > 3.0))
    throw Error(ErrorKind::out_of_regime, "Markov tail bound holds only for |y| > 3");
  return std::min(1.0, sup_moment_r / std::pow(std::fabs(y) - 3.0, r));
}

model::NormTable saturated_norm_table(const PolynomialRegime& regime, double y0)
{
  const int orders = regime.m * regime.k + 1;
  auto table = model::uniform_norm_table(1.0 + std::pow(std::fabs(y0), regime.q), orders, 1.0);
  table.y0 = y0;
  table.q = regime.q;
  table.q_bar = regime.q_bar;
  table.C0 = regime.C0;
  table.c_star = regime.C0 * std::pow(std::fabs(y0), -regime.q_bar);
  return table;
}

BoundValues polynomial_regime_bounds(const PolynomialRegime& regime, double y0)
{
  const double delta =
    std::min({regime.t / 2.0, 1.0, std::pow(std::fabs(y0), -4.0 * regime.q)});
  BoundContext ctx = make_context(delta, std::max(regime.t, delta), 1.0, regime.m, 1, regime.k,
                                  regime.kappa);
  return evaluate(saturated_norm_table(regime, y0), ctx);
}

} // namespace sqrtdiff::bounds
