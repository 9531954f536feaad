#pragma once

#include <cmath>

#include <boost/math/special_functions/beta.hpp>

namespace oracle {

// P(|X(tau)| <= rho) for an alpha-stable process started at the centre of a
// ball of radius R. The exit density c R^alpha (|y|^2 - R^2)^{-alpha/2} |y|^{-d}
// integrates radially (v = |y|^2/R^2 - 1, w = v/(1+v)) to a regularized incomplete
// beta function, independent of the dimension.
inline double stable_ball_exit_cdf(double alpha, double R, double rho) {
  if (rho <= R) return 0.0;
  const double w = 1.0 - (R * R) / (rho * rho);
  return boost::math::ibeta(1.0 - 0.5 * alpha, 0.5 * alpha, w);
}

}  // namespace oracle
