#include <cmath>
#include <sstream>

#include "doctest.h"
#include "levytrace/errors.hpp"
#include "levytrace/numerics.hpp"
#include "levytrace/renewal.hpp"

using namespace levytrace;

namespace {

// kappa through the substitution z = e^v, an integration path independent of the library's.
double kappa_oracle(const SpectralModel& m, double u) {
  const auto g = [&](double v) { return std::log(m.psi(u * std::exp(v))) / (2.0 * std::cosh(v)); };
  std::vector<double> breaks;
  for (int k = -45; k <= 45; ++k) breaks.push_back(k);
  return std::exp(integrate_pieces(g, breaks, 1e-13) / kPi);
}

double stable_V(double alpha, double x) { return std::pow(x, 0.5 * alpha) / std::tgamma(1.0 + 0.5 * alpha); }

}  // namespace

TEST_CASE("kappa of stable exponents is a power") {
  for (double a : {0.5, 1.0, 1.5, 1.9}) {
    CHECK(eval_kappa(SpectralModel::stable(a, 2), 4.0) == doctest::Approx(std::pow(4.0, 0.5 * a)).epsilon(1e-11));
  }
  CHECK(eval_kappa(SpectralModel::stable(1.0, 2), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(eval_kappa(SpectralModel::stable(1.0, 2), 0.0), std::invalid_argument);
}

TEST_CASE("kappa of a stable sum lies in its scaling bracket and matches direct quadrature") {
  const auto m = SpectralModel::stable_sum(0.5, 1.5, 2);
  const double k = eval_kappa(m, 10.0);
  CHECK(k >= std::pow(10.0, 0.25));
  CHECK(k <= m.characteristics().upper_const * std::pow(10.0, 0.75) * std::sqrt(2.0));
  CHECK(k == doctest::Approx(kappa_oracle(m, 10.0)).epsilon(1e-10));
  const auto rel = SpectralModel::relativistic(1.0, 3);
  for (double u : {1e-3, 0.5, 20.0, 1e4}) CHECK(eval_kappa(rel, u) == doctest::Approx(kappa_oracle(rel, u)).epsilon(1e-10));
}

TEST_CASE("Gaver-Stehfest inverts smooth transforms") {
  const auto F = [](double u) { return 1.0 / (u + 1.0); };
  for (double x : {0.1, 1.0, 3.0}) CHECK(gaver_stehfest(F, x, 14) == doctest::Approx(std::exp(-x)).epsilon(1e-4));
  CHECK_THROWS_AS(gaver_stehfest(F, 1.0, 11), std::invalid_argument);
}

TEST_CASE("renewal table of stable processes matches the exact Laplace pair") {
  for (double a : {0.8, 1.0, 1.5}) {
    const auto m = SpectralModel::stable(a, 2);
    const auto table = build_renewal_table(m);
    for (double x : log_space(1e-2, 1e2, 41)) CHECK(table.V(x) == doctest::Approx(stable_V(a, x)).epsilon(1e-2));
    for (std::size_t i = 0; i + 1 < table.xs().size(); i += 7) {
      const double x = table.xs()[i];
      if (2 * x > table.x_max()) break;
      CHECK(table.V(2 * x) / table.V(x) == doctest::Approx(std::pow(2.0, 0.5 * a)).epsilon(1e-4));
    }
    CHECK(table.diagnostics().max_order_spread < 5e-3);
  }
  const auto cauchy = build_renewal_table(SpectralModel::stable(1.0, 2));
  CHECK(cauchy.V(1.0) == doctest::Approx(1.0 / std::tgamma(1.5)).epsilon(1e-4));
  CHECK(cauchy.T(1.0) == doctest::Approx(kPi / 4).epsilon(1e-4));
  double prev = INFINITY;
  for (double x : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const double v = cauchy.V(x);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 0.02);
  CHECK(cauchy.V(0.0) == 0.0);
}

TEST_CASE("T inverts V") {
  for (double a : {0.7, 1.0, 1.6}) {
    const auto m = SpectralModel::stable(a, 2);
    const auto exact = RenewalTable::from_function(m, [a](double x) { return std::pow(x, 0.5 * a); }, 1e-4, 1e4, 512);
    for (double t : {1e-3, 0.05, 0.4, 1.0, 10.0}) {
      if (t < exact.t_min() || t > exact.t_max()) continue;
      CHECK(eval_T(exact, t) == doctest::Approx(std::pow(t, 1.0 / a)).epsilon(1e-9));
      const double v = exact.V(exact.T(t));
      CHECK(v * v == doctest::Approx(t).epsilon(1e-8));
    }
  }
  const auto table = build_renewal_table(SpectralModel::relativistic(1.0, 2));
  for (double t : log_space(table.t_min() * 1.01, table.t_max() * 0.99, 50)) {
    const double v = table.V(table.T(t));
    CHECK(v * v == doctest::Approx(t).epsilon(1e-8));
  }
  CHECK_THROWS_AS(table.T(table.t_max() * 2), std::out_of_range);
  CHECK_THROWS_AS(table.V(table.x_max() * 2), std::out_of_range);
}

TEST_CASE("renewal invariants hold on random samples") {
  for (const auto& m : {SpectralModel::stable(0.8, 2), SpectralModel::relativistic(1.0, 2),
                        SpectralModel::stable_sum(1.0, 1.5, 2), SpectralModel::stable_sum(0.5, 1.5, 3)}) {
    const auto table = build_renewal_table(m);
    RenewalDiagnostics d;
    CHECK(check_renewal_invariants(table, m, d, 2000).empty());
    CHECK(d.samples == 2000);
    CHECK(d.max_subadditivity <= 1.0 + 1e-9);
    CHECK(d.min_sublinear >= 1.0 - 1e-9);
    CHECK(d.max_monotone <= 1.0 + 1e-9);
    CHECK(d.comparability_lo > 0.0);
    CHECK(std::isfinite(d.comparability_hi));
    CHECK(std::isfinite(d.scaling_upper));
    CHECK(d.scaling_lower > 0.0);
  }
}

TEST_CASE("Laplace round trip of the tabulated renewal function") {
  for (const auto& m : {SpectralModel::stable(1.2, 2), SpectralModel::relativistic(1.0, 2),
                        SpectralModel::stable_sum(1.0, 1.5, 2)}) {
    const auto table = build_renewal_table(m);
    for (double u : {0.1, 0.5, 1.0, 3.0, 10.0}) {
      const auto g = [&](double lx) {
        const double x = std::exp(lx);
        return table.V(x) * std::exp(-u * x) * x;
      };
      const auto& xs = table.xs();
      std::vector<double> breaks;
      for (std::size_t i = 0; i < xs.size(); i += 16) breaks.push_back(std::log(xs[i]));
      breaks.push_back(std::log(xs.back()));
      // below x_min, V is bounded by V(x_min)
      const double lt = integrate_pieces(g, breaks, 1e-10) + 0.5 * table.V(xs.front()) * xs.front();
      CHECK(lt == doctest::Approx(1.0 / (u * eval_kappa(m, u))).epsilon(1e-2));
    }
  }
}

TEST_CASE("scaling of T") {
  SUBCASE("stable: exact power law") {
    const auto m = SpectralModel::stable(1.5, 2);
    const auto exact = RenewalTable::from_function(m, [](double x) { return std::pow(x, 0.75); }, 1e-4, 1e4, 512);
    const auto rep = check_T_scaling(exact, m.characteristics());
    CHECK(rep.lower_const == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.upper_const == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.fitted_exponent == doctest::Approx(1.0 / 1.5).epsilon(1e-8));
    const auto num = check_T_scaling(build_renewal_table(m), m.characteristics());
    CHECK(num.lower_const == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(num.upper_const == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("stable sum: exponent at zero between the orders") {
    const auto m = SpectralModel::stable_sum(0.5, 1.5, 2);
    const auto rep = check_T_scaling(build_renewal_table(m), m.characteristics());
    CHECK(rep.fitted_exponent >= 1.0 / 1.5);
    CHECK(rep.fitted_exponent <= 1.0 / 0.5);
    CHECK(rep.lower_const > 0.0);
    CHECK(std::isfinite(rep.upper_const));
  }
  SUBCASE("sublinearity bound holds for every model") {
    for (const auto& m : {SpectralModel::relativistic(1.0, 2), SpectralModel::stable_sum(1.0, 1.5, 2)}) {
      const auto rep = check_T_scaling(build_renewal_table(m), m.characteristics());
      CHECK(rep.sqrt_const <= 2.0 * (1 + 1e-9));
    }
  }
}

TEST_CASE("renewal CSV round trip") {
  const auto m = SpectralModel::relativistic(1.0, 2);
  const auto table = build_renewal_table(m, 1e-3, 1e3, 128);
  std::ostringstream out;
  table.write_csv(out);
  CHECK(out.str().find("# inversion_order=14\n") != std::string::npos);
  std::istringstream in(out.str());
  const auto back = RenewalTable::read_csv(in, m);
  REQUIRE(back.xs().size() == table.xs().size());
  for (std::size_t i = 0; i < table.xs().size(); ++i) {
    CHECK(back.xs()[i] == table.xs()[i]);
    CHECK(back.values()[i] == table.values()[i]);
  }
  std::istringstream again(out.str());
  CHECK_THROWS_AS(RenewalTable::read_csv(again, SpectralModel::relativistic(1.1, 2)), ConfigError);
}

TEST_CASE("parallel and serial table construction agree bitwise") {
  const auto m = SpectralModel::stable_sum(1.0, 1.5, 2);
  const auto a = build_renewal_table(m, 1e-3, 1e3, 96, ExecutionPolicy::serial());
  const auto b = build_renewal_table(m, 1e-3, 1e3, 96, ExecutionPolicy{Execution::parallel, 3});
  CHECK(a.values() == b.values());
}
