#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace levytrace {

inline constexpr double kPi = std::numbers::pi;

/// Surface area of the unit sphere S^{d-1} in R^d.
double unit_sphere_area(int dim);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int dim);

/// n log-spaced points on [a, b], both endpoints included.
std::vector<double> log_space(double a, double b, std::size_t n);

/// Adaptive Gauss-Kronrod (21 point) on a finite interval.
/// `abs_floor` keeps the relative tolerance from chasing an integrand that is
/// identically zero on the interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, double abs_floor = 0.0,
                 unsigned max_depth = 18, double* error = nullptr);

/// Integral over a range split at the given interior breakpoints.
double integrate_pieces(const std::function<double(double)>& f,
                        std::span<const double> breaks, double rel_tol = 1e-12,
                        double abs_floor = 0.0);

/// Wynn epsilon accelerator for a sequence of partial sums.
class WynnEpsilon {
 public:
  /// Appends the next partial sum and returns the current best limit estimate.
  double add(double partial_sum);
  std::size_t size() const noexcept { return count_; }
  /// Difference between the last two limit estimates.
  double last_change() const noexcept { return change_; }

 private:
  std::vector<double> diag_;  // last ascending diagonal of the epsilon table
  std::size_t count_ = 0;
  double estimate_ = 0.0;
  double change_ = INFINITY;
};

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int n);

/// Fritsch-Carlson monotone cubic (PCHIP) interpolant through strictly
/// increasing abscissae.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double front_x() const { return x_.front(); }
  double back_x() const { return x_.back(); }
  std::span<const double> xs() const { return x_; }
  std::span<const double> ys() const { return y_; }
  bool empty() const noexcept { return x_.empty(); }

 private:
  std::vector<double> x_, y_, slope_;
};

/// J_nu(x) for nu = (d - 2) / 2 style orders (any nu >= 0).
double bessel_j(double nu, double x);

/// k-th positive zero (k >= 1) of J_nu. Orders that are multiples of 1/2 up to
/// 7 are served from a per-order cache.
double bessel_zero(double nu, std::size_t k);

struct OscillatoryOptions {
  double rel_tol = 1e-11;       // on successive extrapolated limits
  double abs_tol = 0.0;         // 0: 1e-16 times the largest partial sum
  std::size_t min_terms = 6;
  std::size_t max_terms = 600;
  double tail_cut = 1e-17;      // stop summing when terms fall below this fraction
  double offset = 0.0;          // added to every partial sum (e.g. a separately computed head)
};

struct OscillatoryResult {
  double value = 0.0;
  double error = 0.0;
  double scale = 0.0;           // largest |partial sum| seen, sets the cancellation floor
  std::size_t intervals = 0;
  bool converged = false;
};

/// Integral of f(s) J_nu(r s) over [start, inf), summed between consecutive
/// zeros of J_nu(r s) with Wynn-epsilon acceleration of the partial sums.
/// The result includes options.offset, so tolerances refer to the total.
OscillatoryResult bessel_oscillatory_integral(const std::function<double(double)>& f, double nu,
                                              double r, double start,
                                              const OscillatoryOptions& options = {});

/// "%.17g": round-trips exactly, used for every CSV number.
std::string format_double(double v);

/// Pairwise (cascade) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> values);

}  // namespace levytrace
