#include "sqrtdiff/density.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sqrtdiff::density {

std::string to_string(Method m)
{
  switch (m) {
    case Method::analytic: return "analytic";
    case Method::kde: return "kde";
    case Method::kde_log: return "kde-log";
    case Method::fourier_local: return "fourier-local";
  }
  return "analytic";
}

double silverman_bandwidth(std::span<const double> samples)
{
  if (samples.empty())
    throw Error(ErrorKind::empty_sample, "bandwidth of an empty sample");
  const double sd = numerics::sample_std(samples);
  std::vector<double> copy(samples.begin(), samples.end());
  const double iqr = (numerics::quantile(copy, 0.75) - numerics::quantile(copy, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0))
    spread = std::max(sd, iqr);
  if (!(spread > 0.0))
    throw Error(ErrorKind::invalid_argument, "bandwidth undefined for a constant sample");
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

namespace {

void require_positive(std::span<const double> samples)
{
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] > 0.0)) {
      std::ostringstream msg;
      msg << "log kernel needs positive samples; sample " << i << " is " << samples[i];
      throw Error(ErrorKind::nonpositive_sample, msg.str());
    }
  }
}

std::vector<double> logs(std::span<const double> samples)
{
  require_positive(samples);
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(), [](double x) { return std::log(x); });
  return out;
}

} // namespace

double default_bandwidth(std::span<const double> samples, Kernel kernel)
{
  if (kernel == Kernel::gaussian)
    return silverman_bandwidth(samples);
  if (samples.empty())
    throw Error(ErrorKind::empty_sample, "bandwidth of an empty sample");
  return silverman_bandwidth(logs(samples));
}

DensityEstimate kde(std::span<const double> samples,
                    std::span<const double> grid,
                    double bandwidth,
                    Kernel kernel)
{
  if (samples.empty())
    throw Error(ErrorKind::empty_sample, "kde of an empty sample");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw Error(ErrorKind::invalid_argument, "kde needs a positive bandwidth");

  const bool log_scale = kernel == Kernel::log_gaussian;
  std::vector<double> points =
    log_scale ? logs(samples) : std::vector<double>(samples.begin(), samples.end());
  std::sort(points.begin(), points.end());

  DensityEstimate out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.assign(grid.size(), 0.0);
  out.method = log_scale ? Method::kde_log : Method::kde;
  out.bandwidth = bandwidth;
  out.n_samples = samples.size();

  const double h = bandwidth;
  const double norm = 1.0 / (static_cast<double>(points.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  // Kernel terms beyond 9 bandwidths are below 1e-17 of the peak.
  const double reach = 9.0 * h;

  numerics::parallel_for(grid.size(), numerics::worker_count(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> terms;
    for (std::size_t g = begin; g < end; ++g) {
      const double y = grid[g];
      if (log_scale && !(y > 0.0))
        continue;
      const double u = log_scale ? std::log(y) : y;
      const auto lo = std::lower_bound(points.begin(), points.end(), u - reach);
      const auto hi = std::upper_bound(lo, points.end(), u + reach);
      terms.clear();
      for (auto it = lo; it != hi; ++it) {
        const double z = (u - *it) / h;
        terms.push_back(std::exp(-0.5 * z * z));
      }
      const double value = numerics::pairwise_sum(terms) * norm;
      out.values[g] = log_scale ? value / y : value;
    }
  });
  return out;
}

namespace {

double smoothstep(double u, int k)
{
  switch (k) {
    case 0: return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    case 1: return 30.0 * u * u * (1.0 - u) * (1.0 - u);
    case 2: return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    case 3: return 60.0 * (1.0 - 6.0 * u + 6.0 * u * u);
  }
  throw Error(ErrorKind::invalid_argument, "bump derivatives are available for k <= 3");
}

} // namespace

double bump(double x, double R)
{
  const double r = std::fabs(x);
  if (r <= R)
    return 1.0;
  if (r >= 2.0 * R)
    return 0.0;
  return 1.0 - smoothstep((r - R) / R, 0);
}

double bump_derivative(double x, double R, int k)
{
  if (k < 0 || k > 3)
    throw Error(ErrorKind::invalid_argument, "bump derivatives are available for k <= 3");
  if (k == 0)
    return bump(x, R);
  const double r = std::fabs(x);
  if (r <= R || r >= 2.0 * R)
    return 0.0;
  const double sign = (x < 0.0 && k % 2 == 1) ? -1.0 : 1.0;
  return -sign * smoothstep((r - R) / R, k) / std::pow(R, k);
}

double bump_seminorm(double R, int k)
{
  double sup = 0.0;
  constexpr int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / n;
    sup = std::max(sup, std::fabs(smoothstep(u, k)));
  }
  if (k == 0)
    return 1.0;
  return sup / std::pow(R, k);
}

std::vector<double> symmetric_grid(double xi_max, double step)
{
  if (!(xi_max > 0.0) || !(step > 0.0))
    throw Error(ErrorKind::invalid_argument, "xi grid needs xi_max > 0 and step > 0");
  const auto n = static_cast<std::size_t>(std::floor(xi_max / step + 1e-9));
  std::vector<double> xi(2 * n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    xi[n + j] = static_cast<double>(j) * step;
    xi[n - j] = -xi[n + j];
  }
  return xi;
}

namespace {

struct HalfGrid
{
  std::size_t center = 0;
  std::size_t half = 0; // number of xi >= 0
  double step = 0.0;
};

HalfGrid check_grid(std::span<const double> xi)
{
  if (xi.size() < 3 || xi.size() % 2 == 0)
    throw Error(ErrorKind::invalid_argument, "xi grid must be symmetric with an odd number of points");
  HalfGrid g;
  g.center = xi.size() / 2;
  g.half = g.center + 1;
  g.step = xi[g.center + 1] - xi[g.center];
  const double scale = std::max(1.0, std::fabs(xi.back()));
  if (std::fabs(xi[g.center]) > 1e-12 * scale || !(g.step > 0.0))
    throw Error(ErrorKind::invalid_argument, "xi grid must be increasing and centred at 0");
  for (std::size_t j = 0; j < g.half; ++j) {
    const double expected = static_cast<double>(j) * g.step;
    if (std::fabs(xi[g.center + j] - expected) > 1e-9 * scale ||
        std::fabs(xi[g.center - j] + expected) > 1e-9 * scale)
      throw Error(ErrorKind::invalid_argument, "xi grid must be uniform and symmetric");
  }
  return g;
}

// sum_i w_i e^{i xi_j x_i} for xi_j = j step, j < half. Blocks of 64 xi start
// from a directly evaluated exponential and advance by rotation; samples are
// combined in a fixed pairwise cascade, so the result does not depend on
// the number of workers.
std::vector<std::complex<double>> weighted_exponential_sums(std::span<const double> x,
                                                            std::span<const double> w,
                                                            std::size_t half,
                                                            double step,
                                                            unsigned workers)
{
  constexpr std::size_t block = 64;
  constexpr std::size_t chunk = 256;
  using Row = std::array<std::complex<double>, block>;
  std::vector<std::complex<double>> out(half);
  const std::size_t n_blocks = (half + block - 1) / block;

  numerics::parallel_for(n_blocks, workers ? workers : numerics::worker_count(),
                         [&](std::size_t b_begin, std::size_t b_end) {
    std::vector<Row> levels;
    std::vector<bool> filled;
    for (std::size_t b = b_begin; b < b_end; ++b) {
      const std::size_t j0 = b * block;
      const std::size_t width = std::min(block, half - j0);
      const double xi0 = static_cast<double>(j0) * step;
      levels.clear();
      filled.clear();
      for (std::size_t s0 = 0; s0 < x.size(); s0 += chunk) {
        Row acc{};
        const std::size_t s1 = std::min(x.size(), s0 + chunk);
        for (std::size_t s = s0; s < s1; ++s) {
          std::complex<double> z = w[s] * std::polar(1.0, xi0 * x[s]);
          const std::complex<double> rot = std::polar(1.0, step * x[s]);
          for (std::size_t j = 0; j < width; ++j) {
            acc[j] += z;
            z *= rot;
          }
        }
        // binary-counter cascade
        std::size_t level = 0;
        while (level < filled.size() && filled[level]) {
          for (std::size_t j = 0; j < block; ++j)
            acc[j] += levels[level][j];
          filled[level] = false;
          ++level;
        }
        if (level == filled.size()) {
          levels.emplace_back();
          filled.push_back(false);
        }
        levels[level] = acc;
        filled[level] = true;
      }
      Row total{};
      for (std::size_t level = 0; level < filled.size(); ++level)
        if (filled[level])
          for (std::size_t j = 0; j < block; ++j)
            total[j] += levels[level][j];
      for (std::size_t j = 0; j < width; ++j)
        out[j0 + j] = total[j];
    }
  });
  return out;
}

LocalizedCF assemble(double m0,
                     double normalizer,
                     const std::vector<std::complex<double>>& positive,
                     std::span<const double> xi,
                     const HalfGrid& g)
{
  LocalizedCF r;
  r.m0 = m0;
  r.xi.assign(xi.begin(), xi.end());
  r.cf.assign(xi.size(), {});
  for (std::size_t j = 0; j < g.half; ++j) {
    const std::complex<double> v = j == 0 ? std::complex<double>(1.0, 0.0) : positive[j] / normalizer;
    r.cf[g.center + j] = v;
    r.cf[g.center - j] = std::conj(v);
  }
  return r;
}

} // namespace

LocalizedCF empirical_localized_cf(std::span<const double> samples,
                                   double y0,
                                   double R,
                                   std::span<const double> xi,
                                   unsigned workers)
{
  if (samples.empty())
    throw Error(ErrorKind::empty_sample, "localized cf of an empty sample");
  if (!(R > 0.0 && R <= 1.0))
    throw Error(ErrorKind::invalid_argument, "localization radius must lie in (0, 1]");
  const HalfGrid g = check_grid(xi);

  std::vector<double> weights(samples.size());
  std::vector<double> px;
  std::vector<double> pw;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    weights[i] = bump(samples[i] - y0, R);
    if (weights[i] > 0.0) {
      px.push_back(samples[i]);
      pw.push_back(weights[i]);
    }
  }
  const double total = numerics::pairwise_sum(weights);
  if (!(total > 0.0)) {
    std::ostringstream msg;
    msg << "no sample lies within 2R = " << 2.0 * R << " of y0 = " << y0
        << "; the density is identically 0 on the ball";
    throw Error(ErrorKind::zero_mass, msg.str());
  }
  const double m0 = total / static_cast<double>(samples.size());
  const auto positive = weighted_exponential_sums(px, pw, g.half, g.step, workers);
  auto r = assemble(m0, total, positive, xi, g);
  std::vector<double> squares(pw.size());
  std::transform(pw.begin(), pw.end(), squares.begin(), [](double v) { return v * v; });
  r.noise_power = numerics::pairwise_sum(squares) / (total * total);
  return r;
}

LocalizedCF localized_cf_from_density(const std::function<double(double)>& pdf,
                                      double y0,
                                      double R,
                                      std::span<const double> xi)
{
  if (!(R > 0.0 && R <= 1.0))
    throw Error(ErrorKind::invalid_argument, "localization radius must lie in (0, 1]");
  const HalfGrid g = check_grid(xi);
  const double lo = std::max(0.0, y0 - 2.0 * R);
  const double hi = y0 + 2.0 * R;
  if (!(hi > lo))
    throw Error(ErrorKind::zero_mass, "the bump support misses [0, inf)");

  // Panels resolve the highest frequency with ~10 nodes per period; when the
  // support reaches 0 the first panel is split geometrically toward 0.
  const double xi_top = std::fabs(xi.back());
  const auto n_panels = static_cast<std::size_t>(
    std::max(64.0, std::ceil((hi - lo) * xi_top / (2.0 * std::numbers::pi))));
  std::vector<double> edges = numerics::linspace(lo, hi, n_panels + 1);
  if (lo == 0.0) {
    const double first = edges[1];
    std::vector<double> graded{0.0};
    for (int k = 40; k >= 1; --k)
      graded.push_back(std::ldexp(first, -k));
    edges.erase(edges.begin());
    edges.insert(edges.begin(), graded.begin(), graded.end());
  }

  using Rule = boost::math::quadrature::gauss<double, 10>;
  const auto& nodes = Rule::abscissa();
  const auto& wts = Rule::weights();
  std::vector<double> px;
  std::vector<double> pw;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]);
    const double half_width = 0.5 * (edges[p + 1] - edges[p]);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      for (double s : {-1.0, 1.0}) {
        if (nodes[q] == 0.0 && s > 0.0)
          continue;
        const double y = mid + s * half_width * nodes[q];
        const double weight = half_width * wts[q] * pdf(y) * bump(y - y0, R);
        if (!std::isfinite(weight))
          throw Error(ErrorKind::non_finite, "density is not finite inside the bump support");
        if (weight != 0.0) {
          px.push_back(y);
          pw.push_back(weight);
        }
      }
    }
  }
  const double m0 = numerics::pairwise_sum(pw);
  if (!(m0 > 0.0))
    throw Error(ErrorKind::zero_mass, "the density has no mass on the bump support");
  const auto positive = weighted_exponential_sums(px, pw, g.half, g.step, 0);
  return assemble(m0, m0, positive, xi, g);
}

DensityEstimate invert_cf(double m0,
                          std::span<const std::complex<double>> cf,
                          std::span<const double> xi,
                          std::span<const double> grid,
                          int k)
{
  if (cf.size() != xi.size())
    throw Error(ErrorKind::invalid_argument, "cf and xi grid differ in length");
  if (k < 0)
    throw Error(ErrorKind::invalid_argument, "derivative order must be >= 0");
  const HalfGrid g = check_grid(xi);
  for (std::size_t j = 0; j < g.half; ++j) {
    const double gap = std::abs(cf[g.center - j] - std::conj(cf[g.center + j]));
    if (gap > 1e-12) {
      std::ostringstream msg;
      msg << "cf(-xi) differs from conj cf(xi) by " << gap << " at xi = " << xi[g.center + j];
      throw Error(ErrorKind::non_hermitian, msg.str());
    }
  }

  // (-i xi)^k cf(xi) with trapezoid end weights
  std::vector<std::complex<double>> weighted(xi.size());
  const std::complex<double> minus_i(0.0, -1.0);
  for (std::size_t j = 0; j < xi.size(); ++j) {
    const double end_weight = (j == 0 || j + 1 == xi.size()) ? 0.5 : 1.0;
    weighted[j] = end_weight * std::pow(minus_i * xi[j], k) * cf[j];
  }

  DensityEstimate out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.assign(grid.size(), 0.0);
  out.method = Method::fourier_local;
  out.m0 = m0;
  out.bandwidth = std::fabs(xi.back());
  std::vector<double> imag(grid.size(), 0.0);
  const double scale = m0 * g.step / (2.0 * std::numbers::pi);

  numerics::parallel_for(grid.size(), numerics::worker_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::complex<double> acc{};
      for (std::size_t j = 0; j < xi.size(); ++j)
        acc += weighted[j] * std::polar(1.0, -xi[j] * grid[i]);
      out.values[i] = scale * acc.real();
      imag[i] = scale * acc.imag();
    }
  });

  double peak = 0.0;
  double lowest = 0.0;
  double worst_imag = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    peak = std::max(peak, std::fabs(out.values[i]));
    lowest = std::min(lowest, out.values[i]);
    worst_imag = std::max(worst_imag, std::fabs(imag[i]));
  }
  if (peak > 0.0) {
    out.ripple = -lowest / peak;
    out.imaginary_residue = worst_imag / peak;
  }

  const std::size_t tail = std::max<std::size_t>(1, g.half / 10);
  double tail_integral = 0.0;
  for (std::size_t j = g.half - tail; j < g.half; ++j)
    tail_integral += std::pow(xi[g.center + j], k) * std::abs(cf[g.center + j]) * g.step;
  out.truncation_estimate = m0 * tail_integral / std::numbers::pi;
  return out;
}

double cf_cutoff(const LocalizedCF& cf, double power_threshold, double window_width)
{
  const std::size_t center = cf.xi.size() / 2;
  const double step = cf.xi[center + 1] - cf.xi[center];
  const auto window = static_cast<std::size_t>(std::ceil(window_width / step));
  const std::size_t end = cf.xi.size();
  if (end - center <= window)
    return cf.xi.back();
  // sliding mean of |cf|^2 over window + 1 points
  double power = 0.0;
  for (std::size_t j = center; j <= center + window; ++j)
    power += std::norm(cf.cf[j]);
  for (std::size_t j = center;; ++j) {
    if (power / (window + 1) <= power_threshold)
      return cf.xi[j];
    if (j + window + 1 >= end)
      break;
    power += std::norm(cf.cf[j + window + 1]) - std::norm(cf.cf[j]);
  }
  return cf.xi.back();
}

DensityEstimate fourier_local_density(std::span<const double> samples,
                                      std::span<const double> grid,
                                      const FourierOptions& o)
{
  DensityEstimate out;
  LocalizedCF cf;
  std::vector<double> xi;
  try {
    // With the adaptive cutoff the xi range doubles until the cutoff is
    // found; xi blocks are anchored at fixed points, so the values do not
    // depend on how far the range was grown.
    double reach = o.adaptive_cutoff ? std::min(o.xi_max, 32.0) : o.xi_max;
    for (;;) {
      xi = symmetric_grid(reach, o.xi_step);
      cf = empirical_localized_cf(samples, o.y0, o.R, xi, o.workers);
      if (reach >= o.xi_max)
        break;
      if (cf_cutoff(cf, o.noise_factor * cf.noise_power, o.window) < xi.back())
        break;
      reach = std::min(o.xi_max, 2.0 * reach);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::zero_mass)
      throw;
    out.grid.assign(grid.begin(), grid.end());
    out.values.assign(grid.size(), 0.0);
    out.method = Method::fourier_local;
    out.n_samples = samples.size();
    out.localization = Localization{o.y0, o.R};
    out.zero_mass = true;
    return out;
  }

  std::size_t keep = xi.size() / 2;
  if (o.adaptive_cutoff) {
    const double cutoff = cf_cutoff(cf, o.noise_factor * cf.noise_power, o.window);
    keep = static_cast<std::size_t>(std::llround(cutoff / o.xi_step));
    keep = std::max<std::size_t>(keep, 1);
  }
  const std::size_t center = xi.size() / 2;
  const std::span<const double> xi_cut(xi.data() + center - keep, 2 * keep + 1);
  const std::span<const std::complex<double>> cf_cut(cf.cf.data() + center - keep, 2 * keep + 1);
  out = invert_cf(cf.m0, cf_cut, xi_cut, grid, 0);
  out.n_samples = samples.size();
  out.localization = Localization{o.y0, o.R};
  return out;
}

} // namespace sqrtdiff::density
