#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "levytrace/execution.hpp"
#include "levytrace/exponents.hpp"
#include "levytrace/geometry.hpp"
#include "levytrace/rng.hpp"

namespace levytrace {

/// Positive beta-stable variable with Laplace transform exp(-lambda^beta),
/// beta in (0, 1) (Kanter's representation; beta = 1/2 uses 1 / (2 Z^2)).
double sample_positive_stable(double beta, Philox& rng);

/// Exact increments of a subordinated Brownian motion: X(dt) = sqrt(2 S(dt)) Z,
/// where the subordinator S has Laplace exponent phi with psi(r) = phi(r^2).
///   stable(a):        phi = c l^{a/2}
///   stable_sum:       phi = c (l^{a1/2} + l^{a2/2})
///   relativistic(a):  phi = c ((1 + l)^{a/2} - 1), a tilted stable drawn by
///                     rejection with acceptance probability exp(-S)
class IncrementSampler {
 public:
  explicit IncrementSampler(const SpectralModel& model);

  int dimension() const noexcept { return dim_; }
  /// Subordinator increment over dt. `attempts`, if given, accumulates the number
  /// of stable proposals drawn (relativistic rejection).
  double subordinator(double dt, Philox& rng, std::uint64_t* attempts = nullptr) const;
  /// Adds an increment over dt to x (first `dimension()` coordinates).
  void step(Point& x, double dt, Philox& rng) const {
    const double amp = std::sqrt(2.0 * subordinator(dt, rng));
    for (int i = 0; i < dim_; ++i) x[i] += amp * rng.normal();
  }
  Point increment(double dt, Philox& rng) const {
    Point x{};
    step(x, dt, rng);
    return x;
  }
  /// Expected acceptance rate of the relativistic rejection step over dt (1 otherwise).
  double acceptance_rate(double dt) const;

  /// Increments over one fixed dt with the scale factors precomputed.
  class FixedStep {
   public:
    double subordinator(Philox& rng) const;
    void step(Point& x, Philox& rng) const {
      const double amp = std::sqrt(2.0 * subordinator(rng));
      for (int i = 0; i < dim_; ++i) x[i] += amp * rng.normal();
    }

   private:
    friend class IncrementSampler;
    ModelKind kind_ = ModelKind::stable;
    int dim_ = 0;
    int pieces_ = 1;
    double beta1_ = 0.5, beta2_ = 0.5, f1_ = 0.0, f2_ = 0.0;
  };
  FixedStep fixed(double dt) const;

 private:
  ModelKind kind_;
  int dim_;
  double beta1_, beta2_, scale_;
};

/// sample_increment(model, dt, rng): one exact increment; throws for tabulated models.
Point sample_increment(const SpectralModel& model, double dt, Philox& rng);

struct SamplerConfig {
  double h = 0.0;            // skeleton step
  double t_max = 0.0;        // horizon
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  bool bias_pair = true;     // also walk the h/2 skeleton on the same increments
  std::uint64_t stream_offset = 0;

  /// Throws std::invalid_argument unless 0 < h <= t_max / 64 and paths >= 1000.
  void validate() const;
};

struct ExitRecord {
  bool exited = false;
  double tau = 0.0;   // first skeleton time outside D (multiple of the step)
  Point position{};
};

struct ExitSample {
  ExitRecord coarse;  // step h
  ExitRecord fine;    // step h/2, same increments (valid when paired)
  bool paired = false;
  double h = 0.0;
  std::uint64_t stream = 0;
  std::uint64_t seed = 0;
};

/// Walks the skeleton from x0 until its first point outside the domain or t_max.
/// With `paired`, the walk runs at step h/2 and the h skeleton is every second
/// point, so tau_fine <= tau_coarse pathwise. `visit(k, s, x, inside)` is called at
/// every fine grid point s = k h / (1 + paired) before the coarse exit, with
/// `inside` false once the fine skeleton has left the domain.
template <class Visit>
ExitSample walk_skeleton(const IncrementSampler& sampler, const SmoothDomain& domain, const Point& x0, double h,
                         double t_max, bool paired, Philox& rng, Visit&& visit) {
  ExitSample out;
  out.paired = paired;
  out.h = h;
  const int sub = paired ? 2 : 1;
  const double dt = h / sub;
  const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
  const auto stepper = sampler.fixed(dt);
  Point x = x0;
  bool fine_inside = true;
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.step(x, rng);
    const double s = static_cast<double>(k) * dt;
    const bool inside = domain.contains(x);
    if (fine_inside && !inside) {
      fine_inside = false;
      out.fine = {true, s, x};
    }
    if (k % sub == 0 && !inside) {
      out.coarse = {true, s, x};
      break;
    }
    visit(k, s, x, fine_inside);
  }
  if (!paired) out.fine = out.coarse;
  return out;
}

/// One exit sample on stream (config.seed, config.stream_offset + path).
ExitSample sample_exit(const IncrementSampler& sampler, const SmoothDomain& domain, const Point& x0,
                       const SamplerConfig& config, std::uint64_t path);
ExitSample sample_exit(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                       const SamplerConfig& config, std::uint64_t path);

/// config.paths exit samples in path order (deterministic under any policy).
std::vector<ExitSample> sample_exits(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                                     const SamplerConfig& config, const ExecutionPolicy& policy = {});

/// Richardson weight w for skeleton estimates: v = v_fine + w (v_fine - v_coarse),
/// assuming a bias proportional to length_scale(step).
double richardson_weight(const SpectralModel& model, double h);

/// sup_x |G(x) - cdf(x)| for G = F_fine + w (F_fine - F_coarse), the Richardson
/// combination of two empirical distribution functions (w = 0 gives the plain
/// KS statistic of `fine`). Checked on both sides of every jump of G.
double richardson_ks(std::vector<double> coarse, std::vector<double> fine, double w,
                     const std::function<double(double)>& cdf);

/// Target set for the Ikeda-Watanabe check: the complement of the ball
/// B(center, radius), or the empty set.
struct TargetSet {
  bool empty = false;
  Point center{};
  double radius = 0.0;

  bool contains(const Point& x, int dim) const;
};

struct IkedaWatanabeReport {
  double direct = 0.0, direct_se = 0.0;      // P(X(tau) in A, t1 < tau <= t2)
  double formula = 0.0, formula_se = 0.0;    // E int_{t1}^{t2 ^ tau} J_A(X_s) ds
  double z = 0.0;                            // |direct - formula| / joint se
  bool agree = true;                         // within 3 joint standard errors
  double distance = 0.0;                     // dist(D, A)
  std::size_t paths = 0;
};

/// Compares the two sides of the Ikeda-Watanabe formula on one set of paths:
/// the exit law directly, and the jump intensity J_A(y) = int_A nu(z - y) dz
/// accumulated along the killed path (the time-integrated Dirichlet kernel
/// against J_A, written as an occupation time). The domain must be a ball.
/// Throws std::domain_error when A lies within two skeleton length scales of D.
IkedaWatanabeReport check_ikeda_watanabe(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                                         double t1, double t2, const TargetSet& target, const SamplerConfig& config,
                                         const ExecutionPolicy& policy = {});

/// J_A(y) for A the complement of B(0, R) and |y| = u < R (d-dimensional), by
/// quadrature over spheres around y.
double jump_intensity_outside_ball(const SpectralModel& model, double R, double u);

/// Mean and standard error of a sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& values);

}  // namespace levytrace
