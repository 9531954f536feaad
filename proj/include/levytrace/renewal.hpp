#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "levytrace/execution.hpp"
#include "levytrace/exponents.hpp"
#include "levytrace/numerics.hpp"

namespace levytrace {

/// Laplace exponent of the ladder-height subordinator of the first coordinate,
/// kappa(u) = exp((1/pi) int_0^inf log psi(u z) / (1 + z^2) dz).
double eval_kappa(const SpectralModel& model, double u);

/// Gaver-Stehfest inversion of a Laplace transform F at x > 0 with even order n.
double gaver_stehfest(const std::function<double(double)>& F, double x, int order);

struct RenewalDiagnostics {
  double max_subadditivity = 0.0;  // max V(x+y) / (V(x) + V(y))
  double min_sublinear = 0.0;      // min V(e r) / (e V(r) / 2)
  double max_monotone = 0.0;       // max V(e r) / V(r), e <= 1
  double comparability_lo = 0.0;   // min V(r) sqrt(psi(1/r)) over the grid
  double comparability_hi = 0.0;   // max of the same
  double scaling_upper = 0.0;      // max V(e r) / (e^{lower/2} V(r)), r < 1/theta
  double scaling_lower = 0.0;      // min V(e r) / (e^{upper/2} V(r)), r < 1/theta
  double max_order_spread = 0.0;   // worst relative disagreement of the inversion orders
  std::size_t samples = 0;
};

/// Tabulated renewal function V on a log grid with a monotone log-log interpolant.
/// Immutable once built.
class RenewalTable {
 public:
  /// Table of an explicitly given V (used for exact reference functions).
  static RenewalTable from_function(const SpectralModel& model, const std::function<double(double)>& V,
                                    double x_min, double x_max, std::size_t n_points);

  double V(double x) const;
  /// V^{-1}(v) by bisection on the interpolant.
  double inverse(double v) const;
  /// T(t) = V^{-1}(sqrt t).
  double T(double t) const;

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  double t_min() const { return v_.front() * v_.front(); }
  double t_max() const { return v_.back() * v_.back(); }
  const std::vector<double>& xs() const { return x_; }
  const std::vector<double>& values() const { return v_; }
  /// Highest Gaver-Stehfest order used, 0 for tables built from a function.
  int inversion_order() const { return order_; }
  std::uint64_t model_fingerprint() const { return fingerprint_; }
  const std::string& model_name() const { return model_name_; }
  const RenewalDiagnostics& diagnostics() const { return diag_; }

  /// "# levytrace renewal" header (model, fingerprint, order), then "x,V" rows.
  void write_csv(std::ostream& out) const;
  /// Reads a table written by write_csv; the fingerprint must match `model`.
  static RenewalTable read_csv(std::istream& in, const SpectralModel& model);

 private:
  friend RenewalTable build_renewal_table(const SpectralModel&, double, double, std::size_t,
                                          const ExecutionPolicy&);
  RenewalTable(const SpectralModel& model, std::vector<double> x, std::vector<double> v, int order);

  std::vector<double> x_, v_;
  MonotoneCubic log_v_;
  int order_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::string model_name_;
  RenewalDiagnostics diag_;
};

/// Builds V by Gaver-Stehfest inversion of 1/(u kappa(u)) at orders 10, 12, 14.
/// Throws NumericalError when consecutive orders disagree by more than 0.5%
/// or when a table invariant fails (the message names the failing sample).
RenewalTable build_renewal_table(const SpectralModel& model, double x_min = 1e-4, double x_max = 1e4,
                                 std::size_t n_points = 512, const ExecutionPolicy& policy = {});

/// Checks subadditivity, sublinearity, monotonicity and comparability with psi on
/// deterministic random samples; fills the constants of `diag`.
/// Returns an empty string on success, else a description of the failing sample.
std::string check_renewal_invariants(const RenewalTable& table, const SpectralModel& model,
                                     RenewalDiagnostics& diag, std::size_t samples = 1000);

inline double eval_T(const RenewalTable& table, double t) { return table.T(t); }

struct TScalingReport {
  double lower_const = 0.0;   // min T(e t) / (e^{1/lower} T(t))
  double upper_const = 0.0;   // max T(e t) / (e^{1/upper} T(t))
  double sqrt_const = 0.0;    // max T(e t) / (sqrt(e) T(t))
  double fitted_exponent = 0.0;  // log-log slope of T over the lowest two decades of t
  std::size_t samples = 0;
};

TScalingReport check_T_scaling(const RenewalTable& table, const ScalingCharacteristics& c,
                               std::size_t samples = 1000);

}  // namespace levytrace
