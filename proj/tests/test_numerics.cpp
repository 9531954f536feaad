#include <cmath>

#include "doctest.h"
#include "levytrace/numerics.hpp"

using namespace levytrace;

TEST_CASE("sphere and ball measures") {
  CHECK(unit_sphere_area(2) == doctest::Approx(2 * kPi));
  CHECK(unit_sphere_area(3) == doctest::Approx(4 * kPi));
  CHECK(unit_ball_volume(3) == doctest::Approx(4 * kPi / 3));
}

TEST_CASE("adaptive Gauss-Kronrod error is scaled to the panel") {
  long calls = 0;
  double err = 0.0;
  const double v = integrate([&](double x) { ++calls; return std::exp(x); }, 0.0, 1e-3, 1e-13, 0.0, 10, &err);
  CHECK(calls == 21);
  CHECK(err < 1e-17);
  CHECK(v == doctest::Approx(std::expm1(1e-3)).epsilon(1e-15));
  const double w = integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-12);
  CHECK(w == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("Wynn epsilon accelerates an alternating series") {
  WynnEpsilon w;
  double s = 0.0, est = 0.0;
  for (int k = 1; k <= 20; ++k) {
    s += (k % 2 ? 1.0 : -1.0) / k;
    est = w.add(s);
  }
  CHECK(std::abs(est - std::log(2.0)) < 1e-12);
  CHECK(std::abs(s - std::log(2.0)) > 1e-3);
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  const auto gl = gauss_legendre(16);
  double sum = 0.0, moment = 0.0;
  for (int i = 0; i < 16; ++i) {
    sum += gl.weights[i];
    moment += gl.weights[i] * std::pow(gl.nodes[i], 30);
  }
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(moment == doctest::Approx(2.0 / 31.0).epsilon(1e-13));
}

TEST_CASE("monotone cubic preserves monotonicity and interpolates") {
  std::vector<double> x{0, 1, 2, 3, 4, 5}, y{0, 0.1, 0.1, 3, 3.1, 10};
  MonotoneCubic f(x, y);
  double prev = -1.0;
  for (double t = 0; t <= 5.0; t += 0.01) {
    const double v = f(t);
    CHECK(v >= prev - 1e-14);
    prev = v;
  }
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(f(x[i]) == doctest::Approx(y[i]));
}

TEST_CASE("Bessel zeros match known values") {
  CHECK(bessel_zero(0.0, 1) == doctest::Approx(2.404825557695773).epsilon(1e-13));
  CHECK(bessel_zero(0.0, 2) == doctest::Approx(5.520078110286311).epsilon(1e-13));
  CHECK(bessel_zero(0.5, 3) == doctest::Approx(3 * kPi).epsilon(1e-13));
  CHECK(std::abs(bessel_j(0.0, bessel_zero(0.0, 700))) < 1e-10);
}

TEST_CASE("oscillatory Bessel integrals against Laplace-Hankel pairs") {
  // int_0^inf e^{-a s} J0(b s) ds = 1 / sqrt(a^2 + b^2)
  for (double b : {0.5, 3.0, 40.0, 1000.0}) {
    const auto res = bessel_oscillatory_integral([](double s) { return std::exp(-s); }, 0.0, b, 0.0);
    CHECK(res.converged);
    CHECK(res.value == doctest::Approx(1.0 / std::sqrt(1.0 + b * b)).epsilon(1e-9));
  }
  // int_0^inf e^{-s} J0(b s) s ds = (1 + b^2)^{-3/2}: tiny answers keep relative accuracy
  for (double b : {1.0, 20.0, 1e3, 1e5}) {
    const auto res =
        bessel_oscillatory_integral([](double s) { return std::exp(-s) * s; }, 0.0, b, 0.0);
    CHECK(res.converged);
    CHECK(res.value == doctest::Approx(std::pow(1.0 + b * b, -1.5)).epsilon(1e-6));
  }
}

TEST_CASE("pairwise sum is order-stable") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
}
