#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "levytrace/numerics.hpp"

namespace levytrace {

namespace {

constexpr std::size_t kCachedZeros = 512;
constexpr int kCachedOrders = 15;  // 2 nu in [0, 14]

struct ZeroCache {
  std::once_flag once;
  std::vector<double> zeros;
};

std::array<ZeroCache, kCachedOrders>& zero_caches() {
  static std::array<ZeroCache, kCachedOrders> caches;
  return caches;
}

double mcmahon_zero(double nu, std::size_t k) {
  const double beta = (static_cast<double>(k) + 0.5 * nu - 0.25) * kPi;
  const double mu = 4.0 * nu * nu;
  const double e = 8.0 * beta;
  return beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e * e * e);
}

}  // namespace

using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

double bessel_j(double nu, double x) { return boost::math::cyl_bessel_j(nu, x, FastPolicy()); }

double bessel_zero(double nu, std::size_t k) {
  if (k == 0) throw std::invalid_argument("bessel_zero: index starts at 1");
  const double twice = 2.0 * nu;
  const int slot = static_cast<int>(std::lround(twice));
  if (std::abs(twice - slot) < 1e-12 && slot >= 0 && slot < kCachedOrders) {
    if (k > kCachedZeros) return mcmahon_zero(nu, k);
    auto& cache = zero_caches()[static_cast<std::size_t>(slot)];
    std::call_once(cache.once, [&] {
      cache.zeros.resize(kCachedZeros);
      boost::math::cyl_bessel_j_zero(0.5 * slot, 1, static_cast<unsigned>(kCachedZeros), cache.zeros.begin());
    });
    return cache.zeros[k - 1];
  }
  if (k > kCachedZeros) return mcmahon_zero(nu, k);
  return boost::math::cyl_bessel_j_zero(nu, static_cast<int>(k));
}

OscillatoryResult bessel_oscillatory_integral(const std::function<double(double)>& f, double nu,
                                              double r, double start,
                                              const OscillatoryOptions& opt) {
  if (!(r > 0.0)) throw std::invalid_argument("bessel_oscillatory_integral: r must be positive");
  const auto integrand = [&](double s) { return f(s) * bessel_j(nu, r * s); };

  std::size_t k = 1;
  while (bessel_zero(nu, k) / r <= start) ++k;

  OscillatoryResult res;
  WynnEpsilon wynn;
  double sum = opt.offset, max_abs_sum = std::abs(opt.offset), first = 0.0;
  double prev_term = INFINITY;
  int settled = 0;
  double a = start;
  for (std::size_t n = 0; n < opt.max_terms; ++n, ++k) {
    const double b = bessel_zero(nu, k) / r;
    const double floor = 1e-2 * opt.rel_tol * std::max(std::abs(sum), std::abs(first));
    const double term = integrate(integrand, a, b, 1e-13, floor, 14);
    if (n == 0) first = term;
    sum += term;
    max_abs_sum = std::max(max_abs_sum, std::abs(sum));
    const double est = wynn.add(sum);
    res.intervals = n + 1;
    res.scale = max_abs_sum;

    const double tiny = opt.tail_cut * std::max(std::abs(sum), 1e-300);
    if (n >= 2 && std::abs(term) <= tiny && prev_term <= tiny) {
      res.value = sum;
      res.error = std::abs(term);
      res.converged = true;
      return res;
    }
    const double abs_tol = opt.abs_tol > 0.0 ? opt.abs_tol : 1e-16 * max_abs_sum;
    if (n + 1 >= opt.min_terms && wynn.last_change() <= std::max(opt.rel_tol * std::abs(est), abs_tol)) {
      if (++settled >= 2) {
        res.value = est;
        res.error = wynn.last_change();
        res.converged = true;
        return res;
      }
    } else {
      settled = 0;
    }
    prev_term = std::abs(term);
    a = b;
  }
  res.value = sum;
  res.error = INFINITY;
  res.converged = false;
  return res;
}

}  // namespace levytrace
