#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace levytrace {

class KeyValueConfig;

enum class ModelKind { stable, relativistic, stable_sum, tabulated };

/// Declared weak scaling characteristics: psi in WLSC(lower_order, theta, lower_const)
/// and WUSC(upper_order, theta, upper_const). A single theta serves both.
struct ScalingCharacteristics {
  double lower_order = 1.0;
  double upper_order = 1.0;
  double theta = 0.0;
  double lower_const = 1.0;
  double upper_const = 1.0;
};

/// Radial Levy density sampled on a strictly increasing positive (log) grid.
struct RadialProfile {
  std::vector<double> radius;
  std::vector<double> density;
};

/// A radial Levy-Khintchine exponent together with its Levy density.
///
/// Closed-form kinds evaluate psi directly. Tabulated models carry a radial
/// Levy density; their psi is the spherical reduction of the Levy-Khintchine
/// integral, cached on a log grid at construction so that hot loops (renewal
/// inversion, Fourier inversion) can call psi() cheaply.
class SpectralModel {
 public:
  static SpectralModel stable(double alpha, int dim);
  /// psi(r) = (1 + r^2)^{alpha/2} - 1 (unit mass).
  static SpectralModel relativistic(double alpha, int dim);
  /// psi(r) = r^{alpha1} + r^{alpha2}, alpha1 < alpha2.
  static SpectralModel stable_sum(double alpha1, double alpha2, int dim);
  static SpectralModel tabulated(RadialProfile profile, int dim, ScalingCharacteristics declared);

  ModelKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dim_; }
  double alpha() const noexcept { return alpha1_; }
  double alpha2() const noexcept { return alpha2_; }
  /// Multiplier c of psi (the model is c * psi_kind).
  double scale() const noexcept { return scale_; }
  const ScalingCharacteristics& characteristics() const noexcept { return declared_; }

  SpectralModel with_characteristics(ScalingCharacteristics c) const;
  /// The model with exponent c * psi (Levy density scaled by c).
  SpectralModel scaled(double c) const;

  /// Exponent at frequency r >= 0 (cached for tabulated kinds).
  double psi(double r) const;
  /// Levy density at radius r > 0 (tabulated kinds interpolate the profile).
  double levy_density(double r) const;

  /// Inverse of psi on (0, inf): smallest r with psi(r) >= y.
  double psi_inverse(double y) const;
  /// Intrinsic length at time t: 1 / psi^{-1}(1/t). Equals t^{1/alpha} for Stable(alpha).
  double length_scale(double t) const;

  /// Exact increment sampler exists (all kinds except tabulated).
  bool samplable() const noexcept { return kind_ != ModelKind::tabulated; }

  std::string name() const;
  /// Stable 64-bit fingerprint of the model definition.
  std::uint64_t fingerprint() const;

  const RadialProfile* profile() const;

  struct Tabulated;

 private:
  SpectralModel() = default;

  ModelKind kind_ = ModelKind::stable;
  int dim_ = 2;
  double alpha1_ = 1.0;
  double alpha2_ = 1.0;
  double scale_ = 1.0;
  ScalingCharacteristics declared_{};
  std::shared_ptr<const Tabulated> table_;
};

/// Normalizing constant of the stable Levy density: nu(r) = c(d, alpha) r^{-d-alpha}.
double stable_levy_constant(int dim, double alpha);

/// Spherical average of 1 - cos<xi, x> as a function of u = |xi||x|.
double spherical_one_minus_cos(int dim, double u);

/// psi at r; tabulated kinds use direct adaptive quadrature of the profile.
double eval_psi(const SpectralModel& model, double r);

double eval_levy_density(const SpectralModel& model, double r);

/// psi of a tabulated radial Levy density by quadrature, without any cache.
double radial_exponent(const RadialProfile& profile, int dim, double r);

struct ScalingPair {
  double r;
  double s;
  double ratio;
  double bound;
  bool pass;
  bool lower;  // true: WLSC pair, false: WUSC pair
};

struct ScalingReport {
  double min_lower_ratio = 0.0;  // min psi(s)s^{-a}/(psi(r)r^{-a}), a = lower order
  double max_upper_ratio = 0.0;  // max psi(s)s^{-A}/(psi(r)r^{-A}), A = upper order
  bool lower_pass = false;
  bool upper_pass = false;
  std::vector<ScalingPair> extremal;  // per r, the extremal lower and upper pair
  std::vector<ScalingPair> failures;

  bool pass() const noexcept { return lower_pass && upper_pass; }
  void write_csv(std::ostream& out) const;
};

/// Default grid: 200 log-spaced frequencies on [max(theta, 1e-4), 1e4 max(theta, 1)].
std::vector<double> default_scaling_grid(const SpectralModel& model, std::size_t n = 200);

ScalingReport check_weak_scaling(const SpectralModel& model, std::span<const double> grid);

struct HartmanWintnerCertificate {
  bool granted = false;
  std::size_t record_from = 0;  // first index from which every value is a new record
  std::vector<double> radius;
  std::vector<double> ratio;    // psi(r) / ln r
};

HartmanWintnerCertificate check_hartman_wintner(const SpectralModel& model, std::size_t n = 200);

/// Builds a model from the [model] section of a key-value config.
///
///   kind = stable | relativistic | stable_sum | tabulated
///   alpha = 1.0            (alpha1, alpha2 for stable_sum)
///   dim = 2
///   profile = path.csv     (tabulated: "radius,density" rows)
///   lower_order, upper_order, theta, lower_const, upper_const  (optional overrides)
SpectralModel model_from_config(const KeyValueConfig& config);

RadialProfile read_profile_csv(const std::string& path);

}  // namespace levytrace
