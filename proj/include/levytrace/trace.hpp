#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "levytrace/execution.hpp"
#include "levytrace/exponents.hpp"
#include "levytrace/geometry.hpp"
#include "levytrace/heatkernel.hpp"
#include "levytrace/renewal.hpp"

namespace levytrace {

/// Renewal table and kernel grid covering the times an estimator will query:
/// [t_lo / (2 step_div), t_hi]. Building the grid dominates the cost (seconds).
class TraceContext {
 public:
  TraceContext(const SpectralModel& model, double t_lo, double t_hi, int step_div,
               const ExecutionPolicy& policy = {});

  const SpectralModel& model() const { return grid_.model(); }
  const RenewalTable& table() const { return table_; }
  const KernelGrid& grid() const { return grid_; }
  int step_div() const { return step_div_; }
  double T(double t) const { return table_.T(t); }
  double V(double x) const { return table_.V(x); }
  /// C in r_D <= C t / (V(delta)^2 delta^d), from the grid's p_t(r) r^d V(r)^2 / t.
  double c_decay() const { return grid_.diagnostics().bound_210; }
  /// C in r_D <= C T(t)^{-d}, from the grid's p_t(0) T(t)^d.
  double c_peak() const { return grid_.diagnostics().bound_212; }

 private:
  RenewalTable table_;
  KernelGrid grid_;
  int step_div_;
};

struct EstimatorConfig {
  std::size_t paths = 100000;
  std::uint64_t seed = 0;
  std::uint64_t stream_offset = 0;
};

/// Mean with standard error for the step-h skeleton, the coupled step-h/2
/// skeleton, and their Richardson combination (the reported value).
struct SkeletonEstimate {
  double value = 0.0, se = 0.0;
  double coarse = 0.0, coarse_se = 0.0;
  double fine = 0.0, fine_se = 0.0;

  /// Skeleton-bias estimate: value - fine.
  double bias() const { return value - fine; }
};

/// r_D(t, x, x) = E_x[tau_D < t; p_{t - tau_D}(X(tau_D) - x)].
struct RemainderEstimate {
  double t = 0.0;
  Point x{};
  double depth = 0.0;           // delta_D(x)
  SkeletonEstimate r;
  double h = 0.0;
  std::size_t paths = 0;
  double p0 = 0.0;              // p_t(0)
  double bound_peak = 0.0;      // C T(t)^{-d}
  double bound_decay = 0.0;     // C t / (V(delta)^2 delta^d)

  double value() const { return r.value; }
  double se() const { return r.se; }
  /// Skeleton bias larger than the standard error: the step is too coarse.
  bool bias_warning() const { return std::abs(r.bias()) > r.se; }
  /// 0 <= r <= p_t(0) and r <= min(bounds), each within 3 standard errors.
  bool within_bounds() const;
};

/// Remainders at several start points on common random numbers: path i uses
/// the same increments from every start, so weighted sums over the points come
/// with honest standard errors. Step h = t / context.step_div().
struct RemainderProfile {
  std::vector<RemainderEstimate> nodes;
  SkeletonEstimate weighted;    // sum_k weights[k] r(x_k), when weights were given
};

RemainderProfile estimate_remainders(const TraceContext& context, const SmoothDomain& domain, double t,
                                     const std::vector<Point>& starts, const std::vector<double>& weights,
                                     const EstimatorConfig& config, const ExecutionPolicy& policy = {});

RemainderEstimate estimate_remainder(const TraceContext& context, const SmoothDomain& domain, double t,
                                     const Point& x, const EstimatorConfig& config,
                                     const ExecutionPolicy& policy = {});

/// Both sides of p_F - p_D = E_x[tau_D < t, X(tau_D) in F \ D; p_F(t - tau_D, X(tau_D), x)]
/// for D inside F: the left side from independent estimates of r_D and r_F, the
/// right side from paths continued past tau_D until tau_F (step-h skeleton).
struct NestedIdentityReport {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double z = 0.0;
  bool agree = true;            // within 3 joint standard errors
  bool nonnegative = true;      // lhs >= -3 lhs_se
};

NestedIdentityReport check_nested_identity(const TraceContext& context, const SmoothDomain& inner,
                                           const SmoothDomain& outer, double t, const Point& x,
                                           const EstimatorConfig& config, const ExecutionPolicy& policy = {});

/// C_H(t) = int_0^inf r_H(t, q) dq for the half-space H = {x_1 > 0}.
struct HalfSpaceEstimate {
  double t = 0.0;
  SkeletonEstimate c;            // value includes the head term
  double q_min = 0.0, q_max = 0.0;
  double head = 0.0;             // q_min r(q_min), part of the value
  double head_budget = 0.0;      // q_min (p_t(0) - r(q_min))
  double tail_bound = 0.0;       // int_{q_max}^inf C t / (V(q)^2 q^d) dq
  std::vector<double> q;
  std::vector<RemainderEstimate> r;
  std::size_t paths = 0;
  std::size_t pilot_paths = 0;
  double h = 0.0;

  /// (head_budget + tail_bound) / value.
  double budget_fraction() const { return (head_budget + tail_bound) / c.value; }
};

struct HalfSpaceOptions {
  double q_ratio = 1.189207115002721;   // 2^{1/4} between geometric nodes
  double head_fraction = 1.0 / 64.0;    // q_min = T(t) / 64
  double cut = 1e-4;                    // q_max: first node with bound(q) < cut * running / q
  double q_cap = 1e4;                   // pilot nodes reach q_cap * T(t)
  double max_budget = 0.02;
};

/// Nodes are geometric from q_min to q_max, integrated by the trapezoid rule in
/// log q. q_max is chosen on a pilot run (separate streams). Throws
/// NumericalError when head and tail corrections exceed max_budget of the value.
HalfSpaceEstimate estimate_C_H(const TraceContext& context, double t, const EstimatorConfig& config,
                               const HalfSpaceOptions& options = {}, const ExecutionPolicy& policy = {});

struct TraceReport {
  double t = 0.0;
  double T = 0.0;
  double tr = 0.0, tr_se = 0.0;
  double term1 = 0.0;                 // |D| p_t(0)
  double term2 = 0.0, term2_se = 0.0; // |dD| C_H(t)
  double phi = 0.0, phi_se = 0.0;     // (|D| p_t(0) - tr) / (|dD| C_H(t))
  double rho = 0.0, rho_se = 0.0;     // |tr - term1 + term2| / (|D| p_t(0) T^2 / R^2)
  double remainder = 0.0, remainder_se = 0.0;   // int_D r_D(t, x, x) dx
  double inside = 0.0, inside_se = 0.0;         // the part over D_{R/2}
  double inside_const = 0.0;                    // inside R^2 T^{d-2} / |D|
  double head_budget = 0.0;
  double bias = 0.0;                  // Richardson minus h/2 value of the remainder integral
  std::size_t flagged_nodes = 0;      // node se above 5% of its value
  bool degenerate = false;            // T(t) >= R/2: no expansion check
  std::size_t paths = 0;
  double h = 0.0;
  std::vector<RemainderEstimate> nodes;
  HalfSpaceEstimate half_space;
};

struct TraceOptions {
  int interior_nodes = 16;            // Gauss-Legendre on [0, rho - R/2]
  int layer_nodes = 24;               // Gauss-Legendre in log depth on [q_min, R/2]
  HalfSpaceOptions half_space;
};

/// tr(t, D) = |D| p_t(0) - int_D r_D(t, x, x) dx for a ball, by radial symmetry.
/// The half-space part runs on streams disjoint from the trace paths.
TraceReport estimate_trace(const TraceContext& context, const SmoothDomain& ball, double t,
                           const EstimatorConfig& config, const TraceOptions& options = {},
                           const ExecutionPolicy& policy = {});

/// CSV header and row for TraceReports: t,tr,se,term1,term2,phi,rho,paths,h.
std::string trace_csv_header();
std::string trace_csv_row(const TraceReport& report);

enum class Verdict { pass, fail, inconclusive };
const char* verdict_name(Verdict v);

struct ExpansionVerdict {
  Verdict verdict = Verdict::fail;
  std::vector<std::string> notes;
  double final_gap = 0.0;             // |Phi(t_last) - 1|
  double rho_sup = 0.0;
};

struct VerifyOptions {
  double final_tolerance = 0.15;      // |Phi(t_last) - 1| allowed
};

/// Reports ordered by decreasing t (at least 4, geometric). Times with
/// T(t) >= R/2 get a note and stay in the checks.
/// pass: |Phi - 1| nonincreasing up to overlapping 3-sigma intervals, the last
/// within final_tolerance, and rho never above the running maximum beyond
/// 3 sigma. inconclusive: no failure, but some consecutive Phi intervals
/// overlap by more than half their widths. Throws std::invalid_argument for a
/// schedule that violates the preconditions.
ExpansionVerdict verify_expansion(const std::vector<TraceReport>& reports, const VerifyOptions& options = {});

}  // namespace levytrace
