#include "levytrace/renewal.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "levytrace/errors.hpp"

namespace levytrace {

namespace {

constexpr int kOrders[] = {10, 12, 14};
constexpr double kOrderTolerance = 5e-3;
constexpr double kInvariantSlack = 1e-9;

std::vector<double> stehfest_weights(int n) {
  auto fact = [](int k) { return std::tgamma(k + 1.0); };
  const int h = n / 2;
  std::vector<double> w(n + 1, 0.0);
  for (int k = 1; k <= n; ++k) {
    double s = 0.0;
    for (int j = (k + 1) / 2; j <= std::min(k, h); ++j) {
      s += std::pow(j, h) * fact(2 * j) / (fact(h - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
    }
    w[k] = ((k + h) % 2 ? -1.0 : 1.0) * s;
  }
  return w;
}

const std::vector<double>& weights_for(int n) {
  static const std::vector<double> w10 = stehfest_weights(10), w12 = stehfest_weights(12),
                                   w14 = stehfest_weights(14);
  switch (n) {
    case 10: return w10;
    case 12: return w12;
    case 14: return w14;
    default: throw std::invalid_argument("Gaver-Stehfest order must be 10, 12 or 14");
  }
}

// Uniform on [0, 1) from the top 53 bits; portable across standard libraries.
double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double log_uniform(std::mt19937_64& g, double a, double b) {
  return std::exp(std::log(a) + (std::log(b) - std::log(a)) * unit(g));
}

}  // namespace

double eval_kappa(const SpectralModel& model, double u) {
  if (!(u > 0.0) || !std::isfinite(u)) throw std::invalid_argument("eval_kappa: u must be positive");
  // Fold phi in (pi/4, pi/2) onto (0, pi/4): tan(pi/2 - s) = 1/tan(s).
  const auto g = [&](double s) {
    const double t = std::tan(s);
    const double a = model.psi(u * t), b = model.psi(u / t);
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw NumericalError("eval_kappa: psi vanishes or overflows near u = " + format_double(u));
    }
    return std::log(a) + std::log(b);
  };
  // Graded panels toward the logarithmic singularity at s = 0.
  constexpr int kLevels = 60;
  std::vector<double> parts;
  parts.reserve(kLevels + 1);
  double hi = 0.25 * kPi;
  for (int k = 0; k < kLevels; ++k) {
    const double lo = 0.5 * hi;
    parts.push_back(integrate(g, lo, hi, 1e-13, 0.0, 12));
    hi = lo;
  }
  parts.push_back(hi * g(0.5 * hi));
  return std::exp(pairwise_sum(parts) / kPi);
}

double gaver_stehfest(const std::function<double(double)>& F, double x, int order) {
  if (!(x > 0.0)) throw std::invalid_argument("gaver_stehfest: x must be positive");
  const auto& w = weights_for(order);
  const double a = std::log(2.0) / x;
  double s = 0.0;
  for (int k = 1; k <= order; ++k) s += w[k] * F(k * a);
  return a * s;
}

RenewalTable::RenewalTable(const SpectralModel& model, std::vector<double> x, std::vector<double> v, int order)
    : x_(std::move(x)), v_(std::move(v)), order_(order), fingerprint_(model.fingerprint()),
      model_name_(model.name()) {
  if (x_.size() < 2 || v_.size() != x_.size()) throw std::invalid_argument("renewal table needs >= 2 points");
  std::vector<double> lx(x_.size()), lv(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!(v_[i] > 0.0) || !std::isfinite(v_[i])) {
      throw NumericalError("renewal table: non-positive V(" + format_double(x_[i]) + ") = " + format_double(v_[i]));
    }
    if (i > 0 && !(v_[i] > v_[i - 1])) {
      throw NumericalError("renewal table: V not strictly increasing at x = " + format_double(x_[i]));
    }
    lx[i] = std::log(x_[i]);
    lv[i] = std::log(v_[i]);
  }
  log_v_ = MonotoneCubic(std::move(lx), std::move(lv));
}

RenewalTable RenewalTable::from_function(const SpectralModel& model, const std::function<double(double)>& V,
                                         double x_min, double x_max, std::size_t n_points) {
  auto x = log_space(x_min, x_max, n_points);
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = V(x[i]);
  RenewalTable t(model, std::move(x), std::move(v), 0);
  check_renewal_invariants(t, model, t.diag_);
  return t;
}

double RenewalTable::V(double x) const {
  if (x <= 0.0) return 0.0;
  if (x < x_.front() * (1 - 1e-14) || x > x_.back() * (1 + 1e-14)) {
    throw std::out_of_range("V(" + format_double(x) + ") outside the table range [" + format_double(x_.front()) + ", " +
                            format_double(x_.back()) + "]");
  }
  return std::exp(log_v_(std::log(x)));
}

double RenewalTable::inverse(double v) const {
  if (v <= 0.0) return 0.0;
  if (v < v_.front() * (1 - 1e-14) || v > v_.back() * (1 + 1e-14)) {
    throw std::out_of_range("V^{-1}(" + format_double(v) + ") outside the value range [" + format_double(v_.front()) + ", " +
                            format_double(v_.back()) + "]");
  }
  const double target = std::log(v);
  double lo = log_v_.front_x(), hi = log_v_.back_x();
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (log_v_(mid) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double RenewalTable::T(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("T(t) requires t > 0");
  if (t < t_min() * (1 - 1e-13) || t > t_max() * (1 + 1e-13)) {
    throw std::out_of_range("T(" + format_double(t) + ") outside the admissible t interval [" + format_double(t_min()) + ", " +
                            format_double(t_max()) + "]");
  }
  return inverse(std::sqrt(t));
}

void RenewalTable::write_csv(std::ostream& out) const {
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016" PRIx64, fingerprint_);
  out << "# levytrace renewal table\n"
      << "# model=" << model_name_ << "\n"
      << "# fingerprint=" << hex << "\n"
      << "# inversion_order=" << order_ << "\n"
      << "x,V\n";
  for (std::size_t i = 0; i < x_.size(); ++i) out << format_double(x_[i]) << ',' << format_double(v_[i]) << '\n';
}

RenewalTable RenewalTable::read_csv(std::istream& in, const SpectralModel& model) {
  std::string line;
  std::uint64_t fp = 0;
  bool have_fp = false, have_header = false;
  int order = 0;
  std::vector<double> x, v;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
      if (key == "fingerprint") {
        fp = std::stoull(val, nullptr, 16);
        have_fp = true;
      } else if (key == "inversion_order") {
        order = std::stoi(val);
      }
      continue;
    }
    if (!have_header) {
      if (line != "x,V") throw ConfigError("renewal csv: expected header 'x,V' at line " + std::to_string(lineno));
      have_header = true;
      continue;
    }
    std::istringstream row(line);
    double a, b;
    char comma;
    if (!(row >> a >> comma >> b) || comma != ',') {
      throw ConfigError("renewal csv: malformed row at line " + std::to_string(lineno));
    }
    x.push_back(a);
    v.push_back(b);
  }
  if (!have_fp) throw ConfigError("renewal csv: missing fingerprint header");
  if (fp != model.fingerprint()) throw ConfigError("renewal csv: table was built for a different model");
  RenewalTable t(model, std::move(x), std::move(v), order);
  check_renewal_invariants(t, model, t.diag_);
  return t;
}

RenewalTable build_renewal_table(const SpectralModel& model, double x_min, double x_max, std::size_t n_points,
                                 const ExecutionPolicy& policy) {
  if (!(x_min > 0.0) || !(x_max > x_min)) throw std::invalid_argument("renewal table: need 0 < x_min < x_max");
  if (n_points < 64) throw std::invalid_argument("renewal table: need at least 64 points");
  auto x = log_space(x_min, x_max, n_points);
  std::vector<double> v(n_points), spread(n_points);
  const auto F = [&](double u) { return 1.0 / (u * eval_kappa(model, u)); };

  for_each_index(n_points, policy, [&](std::size_t i) {
    // All orders sample F at k ln2 / x, so evaluate each node once.
    const double a = std::log(2.0) / x[i];
    std::vector<double> f(15);
    for (int k = 1; k <= 14; ++k) f[k] = F(k * a);
    double est[3];
    for (int j = 0; j < 3; ++j) {
      const auto& w = weights_for(kOrders[j]);
      double s = 0.0;
      for (int k = 1; k <= kOrders[j]; ++k) s += w[k] * f[k];
      est[j] = a * s;
    }
    const double d = std::max(std::abs(est[1] - est[0]) / std::abs(est[1]), std::abs(est[2] - est[1]) / std::abs(est[2]));
    if (!(d <= kOrderTolerance)) {
      throw NumericalError("renewal inversion unstable at x = " + format_double(x[i]) + ": orders 10/12/14 give " +
                           format_double(est[0]) + ", " + format_double(est[1]) + ", " + format_double(est[2]));
    }
    v[i] = est[2];
    spread[i] = d;
  });

  RenewalTable table(model, std::move(x), std::move(v), 14);
  table.diag_.max_order_spread = *std::max_element(spread.begin(), spread.end());
  const std::string failure = check_renewal_invariants(table, model, table.diag_);
  if (!failure.empty()) throw NumericalError("renewal table invariant violated: " + failure);
  return table;
}

std::string check_renewal_invariants(const RenewalTable& table, const SpectralModel& model, RenewalDiagnostics& diag,
                                     std::size_t samples) {
  std::mt19937_64 gen(0x7265'6e65'7761'6cULL);
  const double lo = table.x_min(), hi = table.x_max();
  const auto& c = model.characteristics();
  const double r_cap = c.theta > 0.0 ? std::min(hi, 1.0 / c.theta) : hi;
  std::string failure;
  auto fail = [&](const std::string& what) {
    if (failure.empty()) failure = what;
  };

  diag.samples = samples;
  diag.max_subadditivity = 0.0;
  diag.min_sublinear = INFINITY;
  diag.max_monotone = 0.0;
  diag.scaling_upper = 0.0;
  diag.scaling_lower = INFINITY;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = log_uniform(gen, lo, 0.5 * hi);
    const double y = log_uniform(gen, lo, hi - x);
    const double ratio = table.V(x + y) / (table.V(x) + table.V(y));
    diag.max_subadditivity = std::max(diag.max_subadditivity, ratio);
    if (ratio > 1.0 + kInvariantSlack) {
      fail("subadditivity V(x+y) <= V(x)+V(y) fails at (x, y) = (" + format_double(x) + ", " + format_double(y) + ")");
    }
  }
  for (std::size_t i = 0; i < samples; ++i) {
    const double r = log_uniform(gen, lo * 1.0001, hi);
    const double e = log_uniform(gen, lo / r, 1.0);
    const double ve = table.V(e * r), vr = table.V(r);
    const double sub = ve / (0.5 * e * vr);
    diag.min_sublinear = std::min(diag.min_sublinear, sub);
    diag.max_monotone = std::max(diag.max_monotone, ve / vr);
    if (sub < 1.0 - kInvariantSlack || ve > vr * (1.0 + kInvariantSlack)) {
      fail("sublinearity e V(r)/2 <= V(e r) <= V(r) fails at (e, r) = (" + format_double(e) + ", " + format_double(r) + ")");
    }
  }
  if (r_cap > lo * 1.0001) {
    for (std::size_t i = 0; i < samples; ++i) {
      const double r = log_uniform(gen, lo * 1.0001, r_cap);
      const double e = log_uniform(gen, lo / r, 1.0);
      const double q = table.V(e * r) / table.V(r);
      diag.scaling_upper = std::max(diag.scaling_upper, q / std::pow(e, 0.5 * c.lower_order));
      diag.scaling_lower = std::min(diag.scaling_lower, q / std::pow(e, 0.5 * c.upper_order));
    }
  }
  diag.comparability_lo = INFINITY;
  diag.comparability_hi = 0.0;
  for (double r : table.xs()) {
    const double k = table.V(r) * std::sqrt(model.psi(1.0 / r));
    diag.comparability_lo = std::min(diag.comparability_lo, k);
    diag.comparability_hi = std::max(diag.comparability_hi, k);
  }
  if (!(diag.comparability_lo > 0.0) || !std::isfinite(diag.comparability_hi)) {
    fail("comparability V(r) psi(1/r)^{1/2} is not bounded away from 0 and infinity");
  }
  return failure;
}

TScalingReport check_T_scaling(const RenewalTable& table, const ScalingCharacteristics& c, std::size_t samples) {
  TScalingReport rep;
  const double t_lo = table.t_min();
  double t_hi = table.t_max();
  if (c.theta > 0.0 && 1.0 / c.theta < table.x_max()) t_hi = std::min(t_hi, std::pow(table.V(1.0 / c.theta), 2));
  if (!(t_hi > t_lo * 1.001)) throw std::invalid_argument("check_T_scaling: empty t range below V(1/theta)^2");
  std::mt19937_64 gen(0x7363'616c'6554ULL);
  rep.lower_const = INFINITY;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = log_uniform(gen, t_lo * 1.0001, t_hi);
    const double e = log_uniform(gen, t_lo / t, 1.0);
    const double q = table.T(e * t) / table.T(t);
    rep.lower_const = std::min(rep.lower_const, q / std::pow(e, 1.0 / c.lower_order));
    rep.upper_const = std::max(rep.upper_const, q / std::pow(e, 1.0 / c.upper_order));
    rep.sqrt_const = std::max(rep.sqrt_const, q / std::sqrt(e));
  }
  rep.samples = samples;
  // Least squares slope of log T against log t on [t_lo, 100 t_lo].
  const auto ts = log_space(t_lo * 1.0001, std::min(100.0 * t_lo, t_hi), 21);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double t : ts) {
    const double lx = std::log(t), ly = std::log(table.T(t));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(ts.size());
  rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return rep;
}

}  // namespace levytrace
