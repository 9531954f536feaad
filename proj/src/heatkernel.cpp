#include "levytrace/heatkernel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "levytrace/errors.hpp"
#include "levytrace/numerics.hpp"

namespace levytrace {

namespace {

constexpr double kDecayExponent = 745.0;  // exp(-745) underflows

// Frequency beyond which exp(-t psi) is zero in double precision.
double frequency_cutoff(const SpectralModel& m, double t) {
  double s = m.psi_inverse(1.0 / t);
  while (t * m.psi(s) < kDecayExponent) s *= 2.0;
  return s;
}

// int_a^b f(s) ds on dyadic pieces in log s. A coarse pass sets an absolute
// floor so pieces where the integrand underflows are not refined for nothing.
double log_pieces(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  const auto g = [&](double v) {
    const double s = std::exp(v);
    return f(s) * s;
  };
  const double la = std::log(a), lb = std::log(b);
  const int n = std::max(1, static_cast<int>(std::ceil((lb - la) / std::log(2.0))));
  std::vector<double> breaks(n + 1);
  for (int i = 0; i <= n; ++i) breaks[i] = la + (lb - la) * i / n;
  double coarse = 0.0;
  for (int i = 0; i < n; ++i) coarse += std::abs(integrate(g, breaks[i], breaks[i + 1], 1.0, 0.0, 0));
  return integrate_pieces(g, breaks, rel_tol, 1e-3 * rel_tol * coarse / n);
}

}  // namespace

double eval_density_raw(const SpectralModel& m, double t, double r) {
  if (!(t > 0.0)) throw std::invalid_argument("eval_density: t must be positive");
  if (!(r >= 0.0)) throw std::invalid_argument("eval_density: r must be nonnegative");
  const int d = m.dimension();
  const double sc = m.psi_inverse(1.0 / t);
  const double s_end = frequency_cutoff(m, t);

  if (r == 0.0) {
    const auto f = [&](double s) { return std::exp(-t * m.psi(s)) * std::pow(s, d - 1); };
    const double s_lo = 1e-8 * sc;
    const double head = std::pow(s_lo, d) / d;
    const double v = head + log_pieces(f, s_lo, s_end, 1e-12);
    return std::pow(2.0 * kPi, -d) * unit_sphere_area(d) * v;
  }

  const double nu = 0.5 * d - 1.0;
  const auto f = [&](double s) { return std::exp(-t * m.psi(s)) * std::pow(s, 0.5 * d) * bessel_j(nu, r * s); };
  const double a = std::min(bessel_zero(nu, 1) / r, s_end);
  const double s_lo = 1e-8 * std::min(a, sc);
  // J_nu(rs) ~ (rs/2)^nu / Gamma(nu+1): the integrand behaves like s^{d-1} near 0.
  double v = f(s_lo) * s_lo / d + log_pieces(f, s_lo, a, 1e-12);
  if (a < s_end) {
    OscillatoryOptions opt;
    opt.rel_tol = 1e-10;
    opt.max_terms = 4000;
    opt.offset = v;
    const auto amp = [&](double s) { return std::exp(-t * m.psi(s)) * std::pow(s, 0.5 * d); };
    const auto osc = bessel_oscillatory_integral(amp, nu, r, a, opt);
    if (!osc.converged || osc.error > 1e-8 * std::max(std::abs(osc.value), 1e-6 * osc.scale)) {
      throw NumericalError("Hankel inversion did not converge at t = " + std::to_string(t) +
                           ", r = " + std::to_string(r));
    }
    v = osc.value;
  }
  return std::pow(2.0 * kPi, -0.5 * d) * std::pow(r, 1.0 - 0.5 * d) * v;
}

double eval_density(const SpectralModel& m, double t, double r) {
  return std::max(eval_density_raw(m, t, r), 0.0);
}

double tail_probability(const SpectralModel& m, double t, double R) {
  if (!(t > 0.0) || !(R > 0.0)) throw std::invalid_argument("tail_probability: t and R must be positive");
  const int d = m.dimension();
  // P(|X_t| > R) = c_d R^{d/2} int_0^inf (1 - exp(-t psi(s))) J_{d/2}(R s) s^{d/2 - 1} ds,
  // c_d = (2 pi)^{-d/2} sigma_{d-1}. Past the first zero the constant 1 is integrated
  // in closed form: int_0^inf J_{d/2}(R s) s^{d/2-1} ds = 2^{d/2-1} Gamma(d/2) R^{-d/2}.
  const double nu = 0.5 * d;
  const double sc = m.psi_inverse(1.0 / t);
  const double a = bessel_zero(nu, 1) / R;
  const double s_lo = 1e-10 * std::min(a, sc);
  const auto head = [&](double s) { return -std::expm1(-t * m.psi(s)) * std::pow(s, nu - 1.0) * bessel_j(nu, R * s); };
  const auto plain = [&](double s) { return std::pow(s, nu - 1.0) * bessel_j(nu, R * s); };
  double v = log_pieces(head, s_lo, a, 1e-12);
  v += std::pow(2.0, nu - 1.0) * std::tgamma(nu) * std::pow(R, -nu) - log_pieces(plain, s_lo, a, 1e-13) -
       plain(s_lo) * s_lo / (2.0 * nu);
  if (a < frequency_cutoff(m, t)) {
    OscillatoryOptions opt;
    opt.rel_tol = 1e-10;
    opt.max_terms = 4000;
    opt.offset = -v;
    const auto amp = [&](double s) { return std::exp(-t * m.psi(s)) * std::pow(s, nu - 1.0); };
    const auto osc = bessel_oscillatory_integral(amp, nu, R, a, opt);
    if (!osc.converged) throw NumericalError("tail probability inversion did not converge");
    v = -osc.value;
  }
  return std::pow(2.0 * kPi, -nu) * unit_sphere_area(d) * std::pow(R, nu) * v;
}

double small_radius_cutoff(const SpectralModel& m, double t, double p0) {
  // Below rho_lo the mass is taken as p(0) times the ball volume; for small
  // indices p stays peaked far below the length scale, so step down until the
  // error of that head term is negligible.
  const int d = m.dimension();
  const double ell = m.length_scale(t);
  double rho = 1e-3;
  while (rho > 1e-12) {
    const double r = ell * rho;
    if (unit_sphere_area(d) * (p0 - eval_density(m, t, r)) * std::pow(r, d) / d <= 1e-11) break;
    rho *= 0.1;
  }
  return rho;
}

double density_mass(const SpectralModel& m, double t) {
  // Trapezoid rule in log r: the integrand decays exponentially at both ends in
  // that variable, so the rule converges geometrically in the node spacing.
  const int d = m.dimension();
  const double ell = m.length_scale(t);
  const double p0 = eval_density(m, t, 0.0);
  const double rho_lo = small_radius_cutoff(m, t, p0);
  const auto decades = static_cast<std::size_t>(std::lround(std::log10(1e4 / rho_lo)));
  const auto rho = log_space(rho_lo, 1e4, decades * 48 + 1);
  const double h = std::log(rho[1] / rho[0]);
  const std::size_t n = rho.size();
  std::vector<double> g(n), terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ell * rho[i];
    g[i] = eval_density(m, t, r) * std::pow(r, d);
    terms[i] = ((i == 0 || i + 1 == n) ? 0.5 : 1.0) * h * g[i];
  }
  // Euler-Maclaurin end correction; the heavy right end is far from negligible.
  const double end_fix = -h / 12.0 * ((g[n - 1] - g[n - 2]) - (g[1] - g[0]));
  const double r_lo = ell * rho.front();
  const double head = p0 * std::pow(r_lo, d) / d;
  return unit_sphere_area(d) * (head + pairwise_sum(terms) + end_fix) + tail_probability(m, t, ell * rho.back());
}

namespace {

std::string node_text(double t, double r) {
  return "t = " + format_double(t) + ", r = " + format_double(r);
}

}  // namespace

double KernelGrid::rho_node(std::size_t k) const { return std::exp(log_rho0_ + dlog_rho_ * k); }

double KernelGrid::shape(double r) const {
  if (model_.kind() == ModelKind::tabulated)
    return std::pow(r, -model_.dimension() - model_.characteristics().upper_order);
  if (!log_nu_.empty() && r >= std::exp(log_nu_.front_x()) && r <= std::exp(log_nu_.back_x()))
    return std::exp(log_nu_(std::log(r)));
  return model_.levy_density(r);
}

double KernelGrid::row_h(const Row& row, double rho) const {
  const double x = (std::log(rho) - log_rho0_) / dlog_rho_;
  const std::size_t last = row.h.size() - 1;
  if (x >= static_cast<double>(last)) return row.h[last];
  const auto k = static_cast<std::size_t>(std::max(x, 0.0));
  const double w = x - k;
  return (1.0 - w) * row.h[k] + w * row.h[k + 1];
}

double KernelGrid::density(double t, double r) const {
  const int d = model_.dimension();
  if (t < rows_.front().t || t > rows_.back().t || rows_.size() < 2) {
    fallbacks_->fetch_add(1, std::memory_order_relaxed);
    return eval_density(model_, t, r);
  }
  const double u = (std::log(t) - log_t0_) / dlog_t_;
  const auto j = std::min(static_cast<std::size_t>(std::max(u, 0.0)), rows_.size() - 2);
  const double w = u - j;
  const Row& a = rows_[j];
  const Row& b = rows_[j + 1];
  const double log_ell = (1.0 - w) * a.log_ell + w * b.log_ell;
  const double rho = r / std::exp(log_ell);
  const double rho_min = rho_node(0);
  if (rho < rho_min) {
    const double q = rho / rho_min;
    const auto g = [&](const Row& row) {
      return std::log(row.p_zero + (row.p_first - row.p_zero) * q * q) + d * row.log_ell;
    };
    return std::exp((1.0 - w) * g(a) + w * g(b) - d * log_ell);
  }
  const double s = shape(r);
  if (!(s > 0.0)) return 0.0;
  return t * s * std::exp((1.0 - w) * row_h(a, rho) + w * row_h(b, rho));
}

double KernelGrid::density_at_zero(double t) const { return density(t, 0.0); }

void KernelGrid::write_csv(std::ostream& out) const {
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(model_.fingerprint()));
  out << "# levytrace kernel grid\n"
      << "# model=" << model_.name() << "\n"
      << "# fingerprint=" << hex << "\n"
      << "t,r,p\n";
  for (const Row& row : rows_) {
    const double ell = std::exp(row.log_ell);
    const std::string ts = format_double(row.t);
    out << ts << ",0," << format_double(row.p_zero) << '\n';
    for (std::size_t k = 0; k < row.h.size(); ++k) {
      const double r = ell * rho_node(k);
      out << ts << ',' << format_double(r) << ',' << format_double(row.t * shape(r) * std::exp(row.h[k])) << '\n';
    }
  }
}

KernelGrid build_kernel_grid(const SpectralModel& m, const RenewalTable& table, const KernelGridOptions& opt,
                             const ExecutionPolicy& policy) {
  if (!(opt.t_min > 0.0) || !(opt.t_max > opt.t_min))
    throw std::invalid_argument("kernel grid: need 0 < t_min < t_max");
  if (opt.rows_per_decade < 2 || opt.nodes_per_decade < 4)
    throw std::invalid_argument("kernel grid: resolution too coarse");
  if (opt.t_min < table.t_min() || opt.t_max > table.t_max())
    throw std::out_of_range("kernel grid: t range [" + format_double(opt.t_min) + ", " + format_double(opt.t_max) +
                            "] leaves the renewal table's T-domain [" + format_double(table.t_min()) + ", " +
                            format_double(table.t_max()) + "]");
  const int d = m.dimension();
  KernelGrid grid(m);

  const double decades = std::log10(opt.t_max / opt.t_min);
  const auto n_rows = static_cast<std::size_t>(std::max(2.0, std::ceil(decades * opt.rows_per_decade) + 1));
  grid.log_t0_ = std::log(opt.t_min);
  grid.dlog_t_ = (std::log(opt.t_max) - grid.log_t0_) / (n_rows - 1);

  double rho_min = 1e-3;
  for (double t : {opt.t_min, opt.t_max})
    rho_min = std::min(rho_min, small_radius_cutoff(m, t, eval_density(m, t, 0.0)));
  grid.log_rho0_ = std::log(rho_min);
  grid.dlog_rho_ = std::log(10.0) / opt.nodes_per_decade;
  grid.diag_.rho_min = rho_min;

  if (m.kind() == ModelKind::relativistic) {
    // nu is a quadrature for this kind; the far-field extrapolation reads a table.
    const auto r = log_space(1e-6, 600.0, 8 * 40 + 1);
    std::vector<double> lr, lnu;
    for (double x : r) {
      const double nu = m.levy_density(x);
      if (!(nu > 0.0)) break;
      lr.push_back(std::log(x));
      lnu.push_back(std::log(nu));
    }
    grid.log_nu_ = MonotoneCubic(lr, lnu);
  }

  struct RowStats {
    std::size_t clamped = 0;
    double mass_error = 0.0;
    double bound_210 = 0.0;
    double p0_Td = 0.0;
  };
  std::vector<KernelGrid::Row> rows(n_rows);
  std::vector<RowStats> stats(n_rows);

  for_each_index(n_rows, policy, [&](std::size_t j) {
    auto& row = rows[j];
    auto& st = stats[j];
    row.t = j + 1 == n_rows ? opt.t_max : std::exp(grid.log_t0_ + grid.dlog_t_ * j);
    if (j == 0) row.t = opt.t_min;
    const double t = row.t;
    const double ell = m.length_scale(t);
    row.log_ell = std::log(ell);
    const double p0 = eval_density(m, t, 0.0);
    row.p_zero = p0;

    std::vector<double> p;
    double prev = p0;
    for (std::size_t k = 0;; ++k) {
      const double rho = grid.rho_node(k);
      const double r = ell * rho;
      double v;
      try {
        v = eval_density_raw(m, t, r);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (kernel grid node " + node_text(t, r) + ")");
      }
      if (!(v > 0.0)) {
        ++st.clamped;
        break;
      }
      if (v > prev + 1e-9 * p0)
        throw NumericalError("kernel grid: density increases in r at " + node_text(t, r));
      p.push_back(v);
      prev = v;
      if (v < opt.floor * p0 || rho > opt.rho_max) break;
    }
    if (p.size() < 4) throw NumericalError("kernel grid: row too short at " + node_text(t, 0.0));
    row.p_first = p.front();
    row.h.resize(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) row.h[k] = std::log(p[k] / (t * grid.shape(ell * grid.rho_node(k))));

    // Mass: trapezoid in log r with the Euler-Maclaurin end term, p(0) on the
    // innermost ball, exact tail probability past the last node.
    const std::size_t n = p.size();
    const double h = grid.dlog_rho_;
    std::vector<double> g(n), terms(n);
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = p[k] * std::pow(ell * grid.rho_node(k), d);
      terms[k] = ((k == 0 || k + 1 == n) ? 0.5 : 1.0) * h * g[k];
    }
    const double end_fix = -h / 12.0 * ((g[n - 1] - g[n - 2]) - (g[1] - g[0]));
    const double r_lo = ell * grid.rho_node(0);
    const double mass = unit_sphere_area(d) * (p0 * std::pow(r_lo, d) / d + pairwise_sum(terms) + end_fix) +
                        tail_probability(m, t, ell * grid.rho_node(n - 1));
    st.mass_error = std::abs(mass - 1.0);

    for (std::size_t k = 0; k < n; ++k) {
      const double r = ell * grid.rho_node(k);
      if (r < table.x_min() || r > table.x_max()) continue;
      const double V = table.V(r);
      st.bound_210 = std::max(st.bound_210, p[k] * std::pow(r, d) * V * V / t);
    }
    st.p0_Td = p0 * std::pow(table.T(t), d);
  });

  auto& diag = grid.diag_;
  diag.rows = n_rows;
  diag.min_p0_Td = INFINITY;
  for (std::size_t j = 0; j < n_rows; ++j) {
    diag.nodes += rows[j].h.size() + 1;
    diag.clamped_nodes += stats[j].clamped;
    diag.max_mass_error = std::max(diag.max_mass_error, stats[j].mass_error);
    diag.bound_210 = std::max(diag.bound_210, stats[j].bound_210);
    diag.bound_212 = std::max(diag.bound_212, stats[j].p0_Td);
    diag.min_p0_Td = std::min(diag.min_p0_Td, stats[j].p0_Td);
  }
  grid.rows_ = std::move(rows);


  if (diag.clamped_nodes * 1000 > diag.nodes)
    throw NumericalError("kernel grid: " + std::to_string(diag.clamped_nodes) + " of " + std::to_string(diag.nodes) +
                         " nodes clamped");
  if (diag.max_mass_error > 1e-6)
    throw NumericalError("kernel grid: normalization off by " + format_double(diag.max_mass_error));

  // Refinement probe at cell midpoints against direct quadrature.
  struct Probe {
    double err = 0.0, t = 0.0, r = 0.0;
    std::size_t cells = 0;
  };
  std::vector<Probe> probes(n_rows - 1);
  for_each_index(n_rows - 1, policy, [&](std::size_t j) {
    const auto& a = grid.rows_[j];
    const auto& b = grid.rows_[j + 1];
    const double t = std::sqrt(a.t * b.t);
    const double ell = std::exp(0.5 * (a.log_ell + b.log_ell));
    const double p0 = eval_density(m, t, 0.0);
    auto& pr = probes[j];
    const auto check = [&](double r) {
      const double exact = eval_density(m, t, r);
      if (exact < 100.0 * opt.floor * p0) return;
      const double err = std::abs(grid.density(t, r) / exact - 1.0);
      ++pr.cells;
      if (err > pr.err) pr = {err, t, r, pr.cells};
    };
    check(0.0);
    check(0.5 * ell * grid.rho_node(0));
    const std::size_t n = std::min(a.h.size(), b.h.size());
    for (std::size_t k = 0; k + 1 < n; ++k) check(ell * std::exp(grid.log_rho0_ + grid.dlog_rho_ * (k + 0.5)));
  });
  for (const auto& pr : probes) {
    diag.probe_cells += pr.cells;
    if (pr.err > diag.max_probe_error) {
      diag.max_probe_error = pr.err;
      diag.probe_t = pr.t;
      diag.probe_r = pr.r;
    }
  }
  if (diag.max_probe_error > 1e-3)
    throw NumericalError("kernel grid: interpolation error " + format_double(diag.max_probe_error) + " at " +
                         node_text(diag.probe_t, diag.probe_r));
  return grid;
}

}  // namespace levytrace
