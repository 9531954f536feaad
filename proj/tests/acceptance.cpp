// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "levytrace/cli.hpp"
#include "levytrace/geometry.hpp"
#include "levytrace/heatkernel.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/renewal.hpp"
#include "levytrace/sampler.hpp"
#include "levytrace/trace.hpp"
#include "oracles.hpp"

#ifndef LEVYTRACE_SOURCE_DIR
#define LEVYTRACE_SOURCE_DIR "."
#endif

using namespace levytrace;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double norm2(const Point& x) { return std::hypot(x[0], x[1]); }

Outcome renewal_oracle() {
  double worst = 0.0;
  for (double alpha : {0.8, 1.0, 1.5}) {
    const auto m = SpectralModel::stable(alpha, 2);
    const auto table = build_renewal_table(m, 1e-3, 1e3, 241);
    for (double x : log_space(1e-2, 1e2, 401)) {
      const double exact = std::pow(x, 0.5 * alpha) / std::tgamma(1.0 + 0.5 * alpha);
      worst = std::max(worst, std::abs(table.V(x) / exact - 1.0));
    }
  }
  return {worst <= 0.01, fmt("max relative error %.2e over alpha in {0.8, 1, 1.5}", worst)};
}

Outcome density_oracle() {
  const auto m = SpectralModel::stable(1.0, 2);
  double worst = 0.0;
  for (double t : log_space(0.05, 1.0, 25)) {
    for (double u : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 3.7, 5.0, 8.0, 12.0, 16.0, 20.0}) {
      const double r = u * t;
      const double exact = t / (2.0 * kPi * std::pow(r * r + t * t, 1.5));
      worst = std::max(worst, std::abs(eval_density(m, t, r) / exact - 1.0));
    }
  }
  const auto table = build_renewal_table(m, 1e-6, 1e4, 401);
  KernelGridOptions opt;
  opt.t_min = 0.05;
  opt.t_max = 1.0;
  const auto grid = build_kernel_grid(m, table, opt);
  double mass = 0.0;
  for (const auto& row : grid.rows()) mass = std::max(mass, std::abs(density_mass(m, row.t) - 1.0));
  mass = std::max(mass, grid.diagnostics().max_mass_error);
  return {worst <= 0.005 && mass <= 1e-6,
          fmt("max relative error %.2e, max |mass - 1| %.2e over %g grid times", worst, mass,
              static_cast<double>(grid.rows().size()))};
}

Outcome increment_law() {
  const std::size_t n = 100000;
  const double t = 0.5;
  const std::vector<SpectralModel> models{SpectralModel::stable(1.0, 2), SpectralModel::stable(1.5, 2),
                                          SpectralModel::relativistic(1.0, 2),
                                          SpectralModel::stable_sum(1.0, 1.5, 2)};
  std::uint64_t stream = 0;
  double zmax = 0.0;
  for (const auto& m : models) {
    const IncrementSampler sampler(m);
    std::vector<Point> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
      Philox rng(1, stream++);
      xs[i] = sampler.increment(t, rng);
    }
    const auto levels = log_space(0.05, 3.0, 12);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double r = m.psi_inverse(levels[k] / t);
      const double angle = 0.37 * static_cast<double>(k);
      const double x1 = r * std::cos(angle), x2 = r * std::sin(angle);
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = std::cos(x1 * xs[i][0] + x2 * xs[i][1]);
      const auto est = mean_se(c);
      zmax = std::max(zmax, std::abs(est.mean - std::exp(-t * m.psi(r))) / est.se);
    }
  }
  return {zmax <= 3.0, fmt("max |z| %.2f over 12 frequencies x 4 models, N = 1e5", zmax)};
}

Outcome ball_exit() {
  // Brute-force radial exit density against the closed-form CDF.
  const double alpha = 1.0;
  const auto density = [&](double rho) {
    return 2.0 / kPi * std::sin(0.5 * kPi * alpha) * std::pow(rho * rho - 1.0, -0.5 * alpha) / rho;
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  double oracle_gap = 0.0;
  for (double rho : {1.001, 1.1, 1.5, 2.0, 4.0, 10.0}) {
    const double brute = ts.integrate(density, 1.0, rho);
    oracle_gap = std::max(oracle_gap, std::abs(brute - oracle::stable_ball_exit_cdf(alpha, 1.0, rho)));
  }

  const auto m = SpectralModel::stable(alpha, 2);
  const auto ball = SmoothDomain::ball({0.0, 0.0}, 1.0);
  const double h = 2.5e-4;
  const SamplerConfig cfg{h, 12.0, 100000, 4};
  const auto out = sample_exits(m, ball, Point{}, cfg);
  std::vector<double> rc, rf;
  for (const auto& e : out) {
    if (!e.coarse.exited) return {false, "a path did not exit before the horizon"};
    rc.push_back(norm2(e.coarse.position));
    rf.push_back(norm2(e.fine.position));
  }
  const auto cdf = [&](double r) { return oracle::stable_ball_exit_cdf(alpha, 1.0, r); };
  const double ks = richardson_ks(rc, rf, richardson_weight(m, h), cdf);
  const double crit = 1.358 / std::sqrt(static_cast<double>(out.size()));
  return {ks <= crit && oracle_gap <= 1e-6,
          fmt("Richardson KS %.4f vs 5%% critical value %.4f (oracle cross-check %.1e)", ks, crit, oracle_gap)};
}

Outcome ch_power_law() {
  const std::vector<double> ts{0.8, 0.4, 0.2, 0.1, 0.05};
  std::string detail;
  bool ok = true;
  for (double alpha : {1.0, 1.5}) {
    const TraceContext ctx(SpectralModel::stable(alpha, 2), ts.back(), ts.front(), 64);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto c = estimate_C_H(ctx, ts[i], {100000, 5, static_cast<std::uint64_t>(i) << 44});
      lx.push_back(std::log(ts[i]));
      ly.push_back(std::log(c.c.value));
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0, sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    const double slope = sxy / sxx, expected = -1.0 / alpha;
    ok = ok && std::abs(slope / expected - 1.0) <= 0.05;
    detail += fmt("alpha %g: slope %.4f (expected %.4f) ", alpha, slope, expected);
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome expansion() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"cauchy_disk", "relativistic_disk", "stable_sum_disk"}) {
    const fs::path cfg = fs::path(LEVYTRACE_SOURCE_DIR) / "configs" / (std::string(name) + ".conf");
    const fs::path out = fs::temp_directory_path() / "levytrace_acceptance" / name;
    std::ostringstream o, e;
    const int code = run_cli({"verify", "--config", cfg.string(), "--out", out.string()}, o, e);
    const std::string verdict = slurp(out / "verdict.txt");
    const auto line = verdict.substr(0, verdict.find('\n'));
    const auto gap = verdict.find("final_gap=");
    const double g = gap == std::string::npos ? NAN : std::stod(verdict.substr(gap + 10));
    std::cerr << o.str();
    ok = ok && code == 0;
    detail += std::string(name) + " " + (line.empty() ? "no verdict" : line.substr(8)) + fmt(" (gap %.3f) ", g);
  }
  return {ok, detail};
}

Outcome invariants() {
  std::vector<std::string> failed;
  const auto expect = [&](bool c, const std::string& what) {
    if (!c) failed.push_back(what);
  };
  for (const auto& m : {SpectralModel::stable(1.0, 2), SpectralModel::relativistic(1.0, 2),
                        SpectralModel::stable_sum(1.0, 1.5, 2)}) {
    const auto table = build_renewal_table(m, 1e-6, 1e4, 401);
    RenewalDiagnostics d;
    expect(check_renewal_invariants(table, m, d).empty(), "renewal invariants " + m.name());
    expect(d.max_subadditivity <= 1.0 + 1e-9, "subadditivity of V " + m.name());
    KernelGridOptions opt;
    opt.t_min = 1e-3;
    opt.t_max = 1.0;
    // Building validates unimodality of every row.
    const auto grid = build_kernel_grid(m, table, opt);
    const auto& g = grid.diagnostics();
    expect(std::isfinite(g.bound_210) && g.bound_210 > 0, "decay constant " + m.name());
    expect(std::isfinite(g.bound_212) && g.min_p0_Td > 0, "peak constants " + m.name());
    std::cerr << m.name() << ": p_t(r) r^d V(r)^2 / t <= " << g.bound_210 << ", p_t(0) T(t)^d in [" << g.min_p0_Td
              << ", " << g.bound_212 << "]\n";
  }

  const TraceContext ctx(SpectralModel::stable(1.0, 2), 0.1, 0.1, 32);
  const auto disk = SmoothDomain::ball({0.0, 0.0}, 1.0);
  const auto big = SmoothDomain::ball({0.0, 0.0}, 2.0);
  std::vector<Point> xs;
  for (double s : {0.0, 0.5, 0.9, 0.97, 0.995}) xs.push_back(Point{s, 0.0});
  const auto a = estimate_remainders(ctx, disk, 0.1, xs, {}, {20000, 2, 0});
  const auto b = estimate_remainders(ctx, big, 0.1, xs, {}, {20000, 2, std::uint64_t{1} << 30});
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& r = a.nodes[k];
    expect(r.within_bounds(), "remainder bounds");
    expect(r.p0 - r.value() >= -3.0 * r.se(), "Hunt nonnegativity");
    expect(r.value() >= b.nodes[k].value() - 3.0 * std::hypot(r.se(), b.nodes[k].se()), "domain monotonicity");
  }
  const auto nested = check_nested_identity(ctx, disk, SmoothDomain::ball({0.2, 0.0}, 1.5), 0.1, Point{0.9, 0.0},
                                            {20000, 2, 0});
  expect(nested.agree && nested.nonnegative, "nested identity");

  const auto gl = gauss_legendre(40);
  double vol = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i)
    vol += 0.5 * gl.weights[i] * disk.inner_layer_boundary(0.5 * (gl.nodes[i] + 1.0));
  expect(std::abs(vol - kPi) < 1e-12, "coarea identity");

  const fs::path dir = fs::temp_directory_path() / "levytrace_acceptance" / "determinism";
  fs::create_directories(dir);
  const auto cfg = dir / "run.conf";
  std::ofstream(cfg) << "[model]\nkind = relativistic\nalpha = 1\n[domain]\nkind = ball\nradius = 1\n"
                        "[schedule]\ntimes = 0.2\n[sampler]\nseed = 9\npaths = 2000\nstep_div = 8\n"
                        "[remainder]\ndepths = 0.02, 0.3\n";
  for (const char* w : {"1", "2"}) {
    std::ostringstream o, e;
    expect(run_cli({"remainder", "--config", cfg.string(), "--out", (dir / w).string(), "--workers", w}, o, e) == 0,
           "CLI run");
  }
  expect(slurp(dir / "1" / "remainder.csv") == slurp(dir / "2" / "remainder.csv"), "CLI determinism");

  std::string detail = "renewal, kernel, remainder, nested, coarea and CLI invariants";
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"renewal oracle", renewal_oracle},       {"density oracle", density_oracle},
      {"increment law", increment_law},         {"ball exit law", ball_exit},
      {"C_H power law", ch_power_law},          {"two-term trace expansion", expansion},
      {"invariant suites", invariants}};
  int failures = 0;
  int id = 1;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id++ << " (" << name << "): " << o.detail
              << fmt(" [%.0f s]", secs) << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
