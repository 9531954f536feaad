#pragma once

#include <cstddef>
#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "levytrace/execution.hpp"
#include "levytrace/exponents.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/renewal.hpp"

namespace levytrace {

/// Free transition density p_t(r) of the isotropic process, by radial Fourier
/// (Hankel) inversion of exp(-t psi). Negative quadrature noise is clamped to 0.
/// Throws NumericalError when the between-zeros extrapolation misses 1e-8.
/// The tolerance is relative to max(|p|, 1e-6 * largest partial sum): far tails
/// that sit below double-precision cancellation come back with absolute accuracy.
double eval_density(const SpectralModel& model, double t, double r);

/// Same quadrature without the clamp at zero.
double eval_density_raw(const SpectralModel& model, double t, double r);

/// P(|X_t| > R) by inversion of the Fourier transform of the ball indicator.
double tail_probability(const SpectralModel& model, double t, double R);

/// sigma_{d-1} int_0^inf p_t(r) r^{d-1} dr: trapezoid rule in log r on
/// [rho_lo, 1e4] * length_scale(t) plus the exact tail probability beyond.
double density_mass(const SpectralModel& model, double t);

/// Smallest rho = r / length_scale(t) worth resolving: a decade at or below 1e-3
/// such that replacing p by p(0) on the ball of that radius moves the mass by
/// at most 1e-11. p0 is eval_density(model, t, 0).
double small_radius_cutoff(const SpectralModel& model, double t, double p0);

struct KernelGridOptions {
  double t_min = 1e-4;
  double t_max = 1.0;
  int rows_per_decade = 32;     // time rows, log-spaced
  int nodes_per_decade = 64;    // radial nodes in rho = r / length_scale(t)
  double floor = 1e-11;         // a row ends once p < floor * p_t(0)
  double rho_max = 1e7;
};

struct KernelGridDiagnostics {
  std::size_t rows = 0;
  std::size_t nodes = 0;
  std::size_t clamped_nodes = 0;     // raw quadrature value <= 0
  double max_mass_error = 0.0;       // max |mass - 1| over rows
  double max_probe_error = 0.0;      // relative, at cell midpoints where p >= 100 floor p_t(0)
  double probe_t = 0.0, probe_r = 0.0;
  std::size_t probe_cells = 0;
  double bound_210 = 0.0;            // max p_t(r) r^d V(r)^2 / t over nodes inside the V table
  double bound_212 = 0.0;            // max p_t(0) T(t)^d
  double min_p0_Td = 0.0;            // min p_t(0) T(t)^d
  double rho_min = 0.0;
};

/// Free transition density on a (log t, log rho) grid, rho = r / length_scale(t).
///
/// Rows store h = log(p_t(r) / (t nu(r))), which tends to a constant far out
/// (p_t ~ t nu) and is linear in log rho near the origin; for stable models the
/// rows coincide. Queries are bilinear in (log t, log rho); past the last node h
/// is held constant. Below the first node a row follows
/// p(0) + (p(rho_min) - p(0)) (rho / rho_min)^2. Times outside [t_min, t_max]
/// fall back to eval_density. Tabulated models use r^{-d-upper_order} in place of nu.
class KernelGrid {
 public:
  double density(double t, double r) const;
  double density_at_zero(double t) const;

  double t_min() const { return rows_.front().t; }
  double t_max() const { return rows_.back().t; }
  const SpectralModel& model() const { return model_; }
  const KernelGridDiagnostics& diagnostics() const { return diag_; }
  /// Number of queries answered by direct quadrature so far.
  std::size_t fallbacks() const { return fallbacks_->load(std::memory_order_relaxed); }

  /// "# levytrace kernel grid" header, then "t,r,p" rows (r = 0 first in each row).
  void write_csv(std::ostream& out) const;

  struct Row {
    double t = 0.0;
    double log_ell = 0.0;
    double p_zero = 0.0;        // p_t(0)
    double p_first = 0.0;       // p_t(l rho_min)
    std::vector<double> h;      // log(p_t(l rho_k) / (t shape(l rho_k)))
  };
  const std::vector<Row>& rows() const { return rows_; }
  double rho_node(std::size_t k) const;

 private:
  friend KernelGrid build_kernel_grid(const SpectralModel&, const RenewalTable&, const KernelGridOptions&,
                                      const ExecutionPolicy&);
  explicit KernelGrid(const SpectralModel& model) : model_(model) {}
  double row_h(const Row& row, double rho) const;
  double shape(double r) const;

  SpectralModel model_;
  std::vector<Row> rows_;
  double log_t0_ = 0.0, dlog_t_ = 0.0;
  double log_rho0_ = 0.0, dlog_rho_ = 0.0;
  MonotoneCubic log_nu_;        // log nu against log r, relativistic only
  KernelGridDiagnostics diag_;
  std::shared_ptr<std::atomic<std::size_t>> fallbacks_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Builds and validates the grid: rows radially nonincreasing, mass within 1e-6
/// of 1, at most 0.1% clamped nodes, probe error at most 1e-3. Throws
/// NumericalError (with the node) otherwise. t_min must satisfy T(t_min) >= x_min
/// of the renewal table.
KernelGrid build_kernel_grid(const SpectralModel& model, const RenewalTable& table,
                             const KernelGridOptions& options, const ExecutionPolicy& policy = {});

}  // namespace levytrace
