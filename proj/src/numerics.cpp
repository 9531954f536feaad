#include "levytrace/numerics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace levytrace {

double unit_sphere_area(int dim) {
  const double h = 0.5 * dim;
  return 2.0 * std::pow(kPi, h) / std::tgamma(h);
}

double unit_ball_volume(int dim) { return unit_sphere_area(dim) / dim; }

std::vector<double> log_space(double a, double b, std::size_t n) {
  if (!(a > 0.0) || !(b > a) || n < 2) {
    throw std::invalid_argument("log_space: need 0 < a < b and n >= 2");
  }
  std::vector<double> out(n);
  const double la = std::log(a), lb = std::log(b);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = a;
  out.back() = b;
  return out;
}

namespace {

// One 21-point Kronrod panel with its embedded 10-point Gauss rule.
// boost's single-panel error comes back unscaled, so the panel is assembled here.
struct Panel {
  double value, error, l1;
};

Panel gk_panel(const std::function<double(double)>& f, double a, double b) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  using G = boost::math::quadrature::gauss<double, 10>;
  static const auto& kx = GK::abscissa();
  static const auto& kw = GK::weights();
  static const auto& gw = G::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const double f0 = f(mid);
  double k = kw[0] * f0, l1 = kw[0] * std::abs(f0), g = 0.0;
  for (std::size_t i = 1; i < kx.size(); ++i) {
    const double fl = f(mid - half * kx[i]), fr = f(mid + half * kx[i]);
    k += kw[i] * (fl + fr);
    l1 += kw[i] * (std::abs(fl) + std::abs(fr));
    if (i % 2 == 1) g += gw[i / 2] * (fl + fr);
  }
  k *= half;
  g *= half;
  l1 *= std::abs(half);
  const double err = std::max(std::abs(k - g), 4.0 * std::numeric_limits<double>::epsilon() * l1);
  return {k, err, l1};
}

// Recursive bisection with an explicit absolute floor.
double gk_adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                   double abs_floor, unsigned depth, double& err_out) {
  const Panel p = gk_panel(f, a, b);
  if (depth == 0 || p.error <= std::max(rel_tol * p.l1, abs_floor) || !std::isfinite(p.value)) {
    err_out += p.error;
    return p.value;
  }
  const double m = 0.5 * (a + b);
  return gk_adaptive(f, a, m, rel_tol, 0.5 * abs_floor, depth - 1, err_out) +
         gk_adaptive(f, m, b, rel_tol, 0.5 * abs_floor, depth - 1, err_out);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_floor, unsigned max_depth, double* error) {
  if (a == b) {
    if (error) *error = 0.0;
    return 0.0;
  }
  double err = 0.0;
  const double v = gk_adaptive(f, a, b, rel_tol, abs_floor, max_depth, err);
  if (error) *error = err;
  return v;
}

double integrate_pieces(const std::function<double(double)>& f, std::span<const double> breaks,
                        double rel_tol, double abs_floor) {
  std::vector<double> parts;
  parts.reserve(breaks.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    parts.push_back(integrate(f, breaks[i], breaks[i + 1], rel_tol, abs_floor));
  }
  return pairwise_sum(parts);
}

double WynnEpsilon::add(double partial_sum) {
  constexpr double kHuge = 1e300;
  const std::size_t n = count_++;
  diag_.push_back(partial_sum);
  double est = partial_sum;
  if (n > 0) {
    double aux2 = 0.0;
    for (std::size_t j = n; j >= 1; --j) {
      const double aux1 = aux2;
      aux2 = diag_[j - 1];
      const double diff = diag_[j] - aux2;
      diag_[j - 1] = std::abs(diff) <= std::numeric_limits<double>::min()
                         ? kHuge
                         : aux1 + 1.0 / diff;
    }
    est = diag_[n % 2];
    if (!std::isfinite(est) || std::abs(est) >= 0.5 * kHuge) est = partial_sum;
  }
  change_ = n == 0 ? INFINITY : std::abs(est - estimate_);
  estimate_ = est;
  return est;
}

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.weights[i] = w;
    gl.weights[n - 1 - i] = w;
  }
  return gl;
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw std::invalid_argument("MonotoneCubic: need >= 2 matching points");
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = x_[i + 1] - x_[i];
    if (!(h > 0.0)) throw std::invalid_argument("MonotoneCubic: abscissae must increase strictly");
    delta[i] = (y_[i + 1] - y_[i]) / h;
  }
  slope_.assign(n, 0.0);
  if (n == 2) {
    slope_[0] = slope_[1] = delta[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) continue;
    const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
    const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
    slope_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  };
  slope_[0] = end_slope(x_[1] - x_[0], x_[2] - x_[1], delta[0], delta[1]);
  slope_[n - 1] = end_slope(x_[n - 1] - x_[n - 2], x_[n - 2] - x_[n - 3], delta[n - 2], delta[n - 3]);
}

double MonotoneCubic::operator()(double x) const {
  const std::size_t n = x_.size();
  std::size_t i;
  if (x <= x_.front()) {
    i = 0;
  } else if (x >= x_.back()) {
    i = n - 2;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
  }
  const double h = x_[i + 1] - x_[i];
  const double s = (x - x_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1] + h11 * h * slope_[i + 1];
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace levytrace
