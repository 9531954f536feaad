#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "levytrace/heatkernel.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/sampler.hpp"
#include "oracles.hpp"

using namespace levytrace;

namespace {

double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    worst = std::max(worst, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return worst;
}

// 5% critical value of the two-sample KS statistic.
double ks_critical(std::size_t n, std::size_t m) { return 1.358 * std::sqrt(double(n + m) / (double(n) * m)); }

double norm(const Point& x, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
  using B = std::array<std::uint32_t, 4>;
  CHECK(Philox::block({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});

  Philox a(5, 9), b(5, 9), c(5, 10);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    same = same && x == y;
    differ = differ || x != z;
  }
  CHECK(same);
  CHECK(differ);
  Philox u(1, 1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("positive stable variables have Laplace transform exp(-lambda^beta)") {
  const std::size_t n = 100000;
  for (double beta : {0.25, 0.5, 0.75}) {
    Philox rng(11, static_cast<std::uint64_t>(beta * 100));
    std::vector<double> s(n);
    for (auto& v : s) v = sample_positive_stable(beta, rng);
    for (double lambda : {0.3, 1.0, 3.0}) {
      std::vector<double> e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(-lambda * s[i]);
      const auto m = mean_se(e);
      CHECK(std::abs(m.mean - std::exp(-std::pow(lambda, beta))) <= 4.0 * m.se);
    }
  }
}

TEST_CASE("increments reproduce the characteristic function exp(-t psi)") {
  const std::size_t n = 100000;
  const double t = 0.5;
  const std::vector<SpectralModel> models{SpectralModel::stable(1.0, 2), SpectralModel::stable(1.5, 2),
                                          SpectralModel::relativistic(1.0, 2),
                                          SpectralModel::stable_sum(1.0, 1.5, 2)};
  std::uint64_t stream = 0;
  for (const auto& m : models) {
    const IncrementSampler sampler(m);
    std::vector<Point> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
      Philox rng(1, stream++);
      xs[i] = sampler.increment(t, rng);
    }
    // 12 frequencies with t psi between 0.05 and 3, in varying directions.
    const auto levels = log_space(0.05, 3.0, 12);
    int outside = 0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double r = m.psi_inverse(levels[k] / t);
      const double angle = 0.37 * static_cast<double>(k);
      const double x1 = r * std::cos(angle), x2 = r * std::sin(angle);
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = std::cos(x1 * xs[i][0] + x2 * xs[i][1]);
      const auto est = mean_se(c);
      const double exact = std::exp(-t * m.psi(r));
      if (std::abs(est.mean - exact) > 3.0 * est.se) ++outside;
    }
    INFO(m.name());
    CHECK(outside == 0);
  }
}

TEST_CASE("increments are isotropic") {
  const std::size_t n = 100000;
  for (const auto& m : {SpectralModel::stable(1.5, 2), SpectralModel::relativistic(1.0, 3)}) {
    const IncrementSampler sampler(m);
    const int d = m.dimension();
    std::vector<std::vector<double>> comp(d, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      Philox rng(8, i);
      const auto x = sampler.increment(1.0, rng);
      for (int j = 0; j < d; ++j) comp[j][i] = x[j];
    }
    for (int j = 0; j < d; ++j) {
      const auto s = mean_se(comp[j]);
      CHECK(std::abs(s.mean) <= 3.0 * s.se);
    }
  }
  // Heavy tails (no mean): each quadrant carries a quarter of the mass.
  const IncrementSampler cauchy(SpectralModel::stable(1.0, 2));
  std::array<double, 4> count{};
  for (std::size_t i = 0; i < n; ++i) {
    Philox rng(9, i);
    const auto x = cauchy.increment(1.0, rng);
    count[(x[0] > 0 ? 1 : 0) + (x[1] > 0 ? 2 : 0)] += 1.0;
  }
  const double se = std::sqrt(0.25 * 0.75 / n);
  for (double c : count) CHECK(std::abs(c / n - 0.25) <= 3.0 * se);
}

TEST_CASE("stable increments are self-similar") {
  // |X(dt)| / dt^{1/alpha} against the radial law of X(1), P(|X(1)| > r) from the heat kernel.
  const std::size_t n = 20000;
  for (double alpha : {0.8, 1.0, 1.5}) {
    const auto m = SpectralModel::stable(alpha, 2);
    const IncrementSampler sampler(m);
    const auto grid = log_space(0.05, 50.0, 120);
    std::vector<double> cdf(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) cdf[k] = 1.0 - tail_probability(m, 1.0, grid[k]);
    for (double dt : {1e-3, 0.1, 7.0}) {
      std::vector<double> a(n);
      for (std::size_t i = 0; i < n; ++i) {
        Philox rng(21, i + static_cast<std::uint64_t>(dt * 1e4) * n);
        a[i] = norm(sampler.increment(dt, rng), 2) / std::pow(dt, 1.0 / alpha);
      }
      std::sort(a.begin(), a.end());
      double worst = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double emp = double(std::upper_bound(a.begin(), a.end(), grid[k]) - a.begin()) / n;
        worst = std::max(worst, std::abs(emp - cdf[k]));
      }
      INFO("alpha " << alpha << " dt " << dt);
      CHECK(worst <= 1.358 / std::sqrt(double(n)));
    }
  }
}

TEST_CASE("relativistic rejection accepts at the advertised rate") {
  const IncrementSampler sampler(SpectralModel::relativistic(1.0, 2));
  for (double dt : {0.05, 0.3, 2.0}) {
    Philox rng(4, 0);
    std::uint64_t attempts = 0;
    const std::size_t n = 50000;
    const int pieces = std::max(1, static_cast<int>(std::ceil(2.0 * dt)));
    for (std::size_t i = 0; i < n; ++i) sampler.subordinator(dt, rng, &attempts);
    const double rate = static_cast<double>(n * pieces) / static_cast<double>(attempts);
    const double p = sampler.acceptance_rate(dt);
    CHECK(p >= std::exp(-0.5) - 1e-12);
    CHECK(rate == doctest::Approx(p).epsilon(0.02));
  }
}

TEST_CASE("tabulated models have no increment sampler") {
  std::vector<double> r = log_space(1e-3, 1e3, 200), nu(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) nu[i] = std::pow(r[i], -3.0) * std::exp(-r[i]);
  const auto model = SpectralModel::tabulated({r, nu}, 2, {1.0, 1.0, 1.0, 0.5, 2.0});
  Philox rng(0, 0);
  CHECK_THROWS_AS(sample_increment(model, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_increment(SpectralModel::stable(1.0, 2), 0.0, rng), std::invalid_argument);
}

TEST_CASE("sampler configuration is validated") {
  const auto m = SpectralModel::stable(1.0, 2);
  const auto ball = SmoothDomain::ball({0, 0}, 1.0);
  SamplerConfig cfg{1e-3, 1.0, 1000, 1};
  CHECK_NOTHROW(cfg.validate());
  cfg.h = 0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.h = 1e-3;
  cfg.paths = 10;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.paths = 1000;
  CHECK_THROWS_AS(sample_exit(m, ball, Point{2.0, 0.0}, cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_exit(SpectralModel::stable(1.0, 3), ball, Point{}, cfg, 0), std::invalid_argument);
}

TEST_CASE("exits from deep inside a domain are rare") {
  const auto m = SpectralModel::stable(1.0, 2);
  const auto ball = SmoothDomain::ball({0, 0}, 1e4);
  const SamplerConfig cfg{1.0 / 64, 1.0, 20000, 5};
  const auto out = sample_exits(m, ball, Point{}, cfg);
  double exits = 0;
  for (const auto& e : out) exits += e.coarse.exited;
  CHECK(exits / out.size() <= 1e-3);
}

TEST_CASE("exit statistics from a half-space depend only on the depth") {
  const auto m = SpectralModel::stable(1.5, 2);
  const double q = 0.3;
  const auto h1 = SmoothDomain::half_space({1, 0}, 0.0);
  const auto h2 = SmoothDomain::half_space({0, 1}, -4.0);
  SamplerConfig cfg{1e-3, 0.5, 20000, 17};
  cfg.bias_pair = false;
  const auto a = sample_exits(m, h1, Point{q, 0.0}, cfg);
  cfg.stream_offset = 1u << 20;
  const auto b = sample_exits(m, h2, Point{25.0, -4.0 + q}, cfg);
  std::vector<double> ta, tb;
  for (const auto& e : a) ta.push_back(e.coarse.exited ? e.coarse.tau : 1e9);
  for (const auto& e : b) tb.push_back(e.coarse.exited ? e.coarse.tau : 1e9);
  CHECK(two_sample_ks(ta, tb) <= ks_critical(ta.size(), tb.size()));
}

TEST_CASE("exit position from a ball follows the stable exit law") {
  struct Case {
    double alpha;
    int d;
    double h;
  };
  for (const auto& c : {Case{1.0, 2, 1e-3}, Case{0.8, 3, 1e-3}}) {
    const auto m = SpectralModel::stable(c.alpha, c.d);
    const auto ball = SmoothDomain::ball(std::vector<double>(c.d, 0.0), 1.0);
    const SamplerConfig cfg{c.h, 12.0, 20000, 29};
    const auto out = sample_exits(m, ball, Point{}, cfg);
    std::vector<double> rc, rf;
    for (const auto& e : out) {
      REQUIRE(e.coarse.exited);
      rc.push_back(norm(e.coarse.position, c.d));
      rf.push_back(norm(e.fine.position, c.d));
    }
    const auto cdf = [&](double r) { return oracle::stable_ball_exit_cdf(c.alpha, 1.0, r); };
    const double crit = 1.358 / std::sqrt(double(out.size()));
    const double plain = richardson_ks(rc, rf, 0.0, cdf);
    const double rich = richardson_ks(rc, rf, richardson_weight(m, c.h), cdf);
    INFO("alpha " << c.alpha << " plain " << plain << " richardson " << rich);
    CHECK(rich <= crit);
    CHECK(rich <= plain);
  }
  CHECK(oracle::stable_ball_exit_cdf(1.0, 1.0, 3.0) == doctest::Approx(2.0 / kPi * std::acos(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("coupled skeletons are ordered") {
  const auto m = SpectralModel::stable_sum(1.0, 1.5, 2);
  const auto inner = SmoothDomain::ball({0, 0}, 1.0);
  const auto outer = SmoothDomain::ball({0.2, 0}, 1.5);
  const SamplerConfig cfg{2e-3, 1.0, 5000, 41};
  const auto a = sample_exits(m, inner, Point{}, cfg);
  const auto b = sample_exits(m, outer, Point{}, cfg);
  bool fine_first = true, nested = true;
  double pc = 0.0, pf = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tc = a[i].coarse.exited ? a[i].coarse.tau : INFINITY;
    const double tf = a[i].fine.exited ? a[i].fine.tau : INFINITY;
    const double to = b[i].coarse.exited ? b[i].coarse.tau : INFINITY;
    fine_first = fine_first && tf <= tc;
    nested = nested && tc <= to;
    pc += tc <= 0.25;
    pf += tf <= 0.25;
  }
  CHECK(fine_first);
  CHECK(nested);
  // The finer skeleton sees at least as many exits by any fixed time.
  const double n = static_cast<double>(a.size());
  CHECK(pf / n >= pc / n - 3.0 * std::sqrt(pc / n * (1 - pc / n) / n));
}

TEST_CASE("exit samples are reproducible under any execution policy") {
  const auto m = SpectralModel::relativistic(1.0, 2);
  const auto ball = SmoothDomain::ball({0, 0}, 1.0);
  const SamplerConfig cfg{1e-2, 2.0, 2000, 99};
  const auto a = sample_exits(m, ball, Point{0.5, 0.1}, cfg, ExecutionPolicy::serial());
  const auto b = sample_exits(m, ball, Point{0.5, 0.1}, cfg, ExecutionPolicy{Execution::parallel, 4});
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i)
    same = same && a[i].coarse.tau == b[i].coarse.tau && a[i].fine.position == b[i].fine.position &&
           a[i].stream == i && b[i].seed == 99;
  CHECK(same);
  const auto again = sample_exit(m, ball, Point{0.5, 0.1}, cfg, 1234);
  CHECK(again.coarse.position == a[1234].coarse.position);
}

TEST_CASE("Richardson weight and KS helper") {
  CHECK(richardson_weight(SpectralModel::stable(1.0, 2), 0.01) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(richardson_weight(SpectralModel::stable(2.0 / 3.0, 2), 0.01) ==
        doctest::Approx(1.0 / (std::pow(2.0, 1.5) - 1.0)).epsilon(1e-9));
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  CHECK(richardson_ks({}, {0.5}, 0.0, uniform) == doctest::Approx(0.5));
  CHECK(richardson_ks({0.2, 0.6}, {0.25, 0.75}, 0.0, uniform) == doctest::Approx(0.25));
  // G = 2 F_fine - F_coarse dips to -1/2 on [0.1, 0.5).
  CHECK(richardson_ks({0.1, 0.9}, {0.5, 0.6}, 1.0, uniform) == doctest::Approx(1.0));
  CHECK_THROWS_AS(richardson_ks({}, {0.5}, 1.0, uniform), std::invalid_argument);
}

TEST_CASE("Ikeda-Watanabe: exit law against accumulated jump intensity") {
  const auto m = SpectralModel::stable(1.0, 2);
  const auto ball = SmoothDomain::ball({0, 0}, 1.0);
  SamplerConfig cfg{1e-3, 0.6, 20000, 61};
  cfg.bias_pair = false;
  TargetSet far{false, Point{}, 2.5};
  const auto full = check_ikeda_watanabe(m, ball, Point{0.3, 0.0}, 0.0, 0.6, far, cfg);
  INFO("direct " << full.direct << " formula " << full.formula << " z " << full.z);
  CHECK(full.agree);
  CHECK(full.direct > 5.0 * full.direct_se);

  const auto early = check_ikeda_watanabe(m, ball, Point{0.3, 0.0}, 0.0, 0.2, far, cfg);
  const auto late = check_ikeda_watanabe(m, ball, Point{0.3, 0.0}, 0.2, 0.6, far, cfg);
  CHECK(early.agree);
  CHECK(late.agree);
  CHECK(early.formula + late.formula == doctest::Approx(full.formula).epsilon(1e-12));
  CHECK(early.direct + late.direct == doctest::Approx(full.direct).epsilon(1e-12));

  TargetSet shifted{false, Point{0.5, 0.5}, 3.0};
  CHECK(check_ikeda_watanabe(m, ball, Point{}, 0.1, 0.6, shifted, cfg).agree);

  const auto none = check_ikeda_watanabe(m, ball, Point{}, 0.0, 0.6, TargetSet{true}, cfg);
  CHECK(none.direct == 0.0);
  CHECK(none.formula == 0.0);
  CHECK(none.agree);

  TargetSet close{false, Point{}, 1.0 + 1e-3};
  CHECK_THROWS_AS(check_ikeda_watanabe(m, ball, Point{}, 0.0, 0.6, close, cfg), std::domain_error);
}

TEST_CASE("jump intensity outside a ball") {
  // Cauchy in d = 2: nu(z) = (2 pi)^{-1} |z|^{-3}, so J(0) = int_R^inf s^{-2} ds = 1/R.
  const auto m = SpectralModel::stable(1.0, 2);
  CHECK(jump_intensity_outside_ball(m, 2.0, 0.0) == doctest::Approx(0.5).epsilon(1e-8));
  // Direct polar quadrature around y = (u, 0).
  const double R = 2.0, u = 1.2;
  const auto gl = gauss_legendre(64);
  double direct = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double th = kPi * (gl.nodes[i] + 1.0);
    const double c = std::cos(th);
    // distance from y to the circle along direction th
    const double s0 = -u * c + std::sqrt(R * R - u * u * (1 - c * c));
    direct += kPi * gl.weights[i] / (2.0 * kPi) / s0;
  }
  CHECK(jump_intensity_outside_ball(m, R, u) == doctest::Approx(direct).epsilon(1e-7));
  CHECK_THROWS_AS(jump_intensity_outside_ball(m, R, R), std::invalid_argument);
}
