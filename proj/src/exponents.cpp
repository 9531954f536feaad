#include "levytrace/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "levytrace/config.hpp"
#include "levytrace/errors.hpp"
#include "levytrace/numerics.hpp"

namespace levytrace {

namespace {

void require_dimension(int dim) {
  if (dim < 2) throw std::invalid_argument("dimension must be >= 2");
  if (dim > 8) throw std::invalid_argument("dimension must be <= 8");
}

void require_order(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 2.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in (0, 2)");
  }
}

// log-log monotone interpolation of a radial profile with power-law ends.
class ProfileInterpolant {
 public:
  ProfileInterpolant() = default;
  explicit ProfileInterpolant(const RadialProfile& p) {
    const std::size_t n = p.radius.size();
    std::vector<double> lr, ln;
    for (std::size_t i = 0; i < n && p.density[i] > 0.0; ++i) {
      lr.push_back(std::log(p.radius[i]));
      ln.push_back(std::log(p.density[i]));
    }
    if (lr.size() < 2) throw std::invalid_argument("tabulated profile needs >= 2 positive leading values");
    cut_ = lr.size() < n ? p.radius[lr.size()] : INFINITY;
    head_slope_ = (ln[1] - ln[0]) / (lr[1] - lr[0]);
    const std::size_t m = lr.size();
    tail_slope_ = cut_ < INFINITY ? -INFINITY : (ln[m - 1] - ln[m - 2]) / (lr[m - 1] - lr[m - 2]);
    log_interp_ = MonotoneCubic(std::move(lr), std::move(ln));
  }

  double operator()(double s) const {
    const double ls = std::log(s);
    if (s >= cut_) return 0.0;
    if (ls <= log_interp_.front_x()) {
      return std::exp(log_interp_.ys().front() + head_slope_ * (ls - log_interp_.front_x()));
    }
    if (ls >= log_interp_.back_x()) {
      if (cut_ < INFINITY) return std::exp(log_interp_.ys().back());
      return std::exp(log_interp_.ys().back() + tail_slope_ * (ls - log_interp_.back_x()));
    }
    return std::exp(log_interp_(ls));
  }

  double head_slope() const { return head_slope_; }
  double tail_slope() const { return tail_slope_; }
  double first_radius() const { return std::exp(log_interp_.front_x()); }
  double last_radius() const { return cut_ < INFINITY ? cut_ : std::exp(log_interp_.back_x()); }
  bool compact() const { return cut_ < INFINITY; }

 private:
  MonotoneCubic log_interp_;
  double head_slope_ = 0.0;
  double tail_slope_ = 0.0;
  double cut_ = INFINITY;
};

void validate_profile(const RadialProfile& p, int dim) {
  const std::size_t n = p.radius.size();
  if (n < 4 || p.density.size() != n) throw std::invalid_argument("tabulated profile needs >= 4 (radius, density) pairs");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p.radius[i] > 0.0) || !(p.density[i] >= 0.0) || !std::isfinite(p.density[i])) {
      throw std::invalid_argument("tabulated profile: radii must be positive and densities finite, nonnegative");
    }
    if (i > 0 && !(p.radius[i] > p.radius[i - 1])) throw std::invalid_argument("tabulated profile: radii must increase");
    if (i > 0 && p.density[i] > p.density[i - 1] * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "tabulated Levy density is not unimodal: nu(" << p.radius[i] << ") = " << p.density[i]
          << " > nu(" << p.radius[i - 1] << ") = " << p.density[i - 1];
      throw std::invalid_argument(msg.str());
    }
  }
  const ProfileInterpolant nu(p);
  if (!(dim + 2 + nu.head_slope() > 0.0)) {
    throw std::invalid_argument("tabulated profile: (|x|^2 ^ 1) nu(dx) diverges at the origin");
  }
  if (!nu.compact() && !(dim + nu.tail_slope() < 0.0)) {
    throw std::invalid_argument("tabulated profile: nu(B(0,1)^c) diverges");
  }
}

// Integral of nu(s) s^{d-1} over [a, inf) for the interpolated profile.
double profile_tail_mass(const ProfileInterpolant& nu, int dim, double a) {
  const double last = nu.last_radius();
  double total = 0.0;
  if (a < last) {
    const auto g = [&](double v) {
      const double s = std::exp(v);
      return nu(s) * std::pow(s, dim);
    };
    const double la = std::log(a), lb = std::log(last);
    const int pieces = std::max(1, static_cast<int>(std::ceil((lb - la) / 1.0)));
    std::vector<double> breaks(pieces + 1);
    for (int i = 0; i <= pieces; ++i) breaks[i] = la + (lb - la) * i / pieces;
    total += integrate_pieces(g, breaks, 1e-12);
  }
  if (!nu.compact()) {
    const double s0 = std::max(a, last);
    total += nu(s0) * std::pow(s0, dim) / (-(dim + nu.tail_slope()));
  }
  return total;
}

double radial_exponent_impl(const ProfileInterpolant& nu, int dim, double r) {
  if (r == 0.0) return 0.0;
  const double order = 0.5 * dim - 1.0;
  const double split = 1.0 / r;

  // Near part: rs < 1, non-oscillatory.
  const double s_lo = 1e-3 * std::min(split, nu.first_radius());
  const double p = nu.head_slope();
  double near = r * r / (2.0 * dim) * nu(s_lo) * std::pow(s_lo, dim + 2) / (dim + 2 + p);
  {
    const auto g = [&](double v) {
      const double s = std::exp(v);
      return spherical_one_minus_cos(dim, r * s) * nu(s) * std::pow(s, dim);
    };
    const double la = std::log(s_lo), lb = std::log(split);
    const int pieces = std::max(1, static_cast<int>(std::ceil((lb - la) / 1.0)));
    std::vector<double> breaks(pieces + 1);
    for (int i = 0; i <= pieces; ++i) breaks[i] = la + (lb - la) * i / pieces;
    near += integrate_pieces(g, breaks, 1e-12);
  }

  // Far part: 1 - j(rs) split into the plain mass and the oscillatory remainder.
  const double mass = profile_tail_mass(nu, dim, split);
  const double norm = std::tgamma(order + 1.0);
  const auto amp = [&](double s) {
    return nu(s) * std::pow(s, dim - 1) * norm * std::pow(2.0 / (r * s), order);
  };
  OscillatoryOptions opt;
  opt.rel_tol = 1e-10;
  const auto osc = bessel_oscillatory_integral(amp, order, r, split, opt);
  if (!osc.converged) throw NumericalError("radial exponent: oscillatory tail did not converge");
  return unit_sphere_area(dim) * (near + mass - osc.value);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

struct SpectralModel::Tabulated {
  RadialProfile profile;
  ProfileInterpolant nu;
  MonotoneCubic log_psi;  // log psi against log r
  double lo_slope = 2.0, hi_slope = 0.0;
};

double stable_levy_constant(int dim, double alpha) {
  return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (dim + alpha)) /
         (std::pow(kPi, 0.5 * dim) * std::tgamma(1.0 - 0.5 * alpha));
}

double spherical_one_minus_cos(int dim, double u) {
  const double order = 0.5 * dim - 1.0;
  u = std::abs(u);
  if (u < 2.0) {
    // 1 - Gamma(nu+1)(2/u)^nu J_nu(u) = sum_{k>=1} (-1)^{k+1} (u/2)^{2k} / (k! (nu+1)_k)
    const double q = 0.25 * u * u;
    double term = 1.0, sum = 0.0;
    for (int k = 1; k <= 40; ++k) {
      term *= -q / (k * (order + k));
      sum -= term;
      if (std::abs(term) <= 1e-17 * sum) break;
    }
    return sum;
  }
  return 1.0 - std::tgamma(order + 1.0) * std::pow(2.0 / u, order) * bessel_j(order, u);
}

SpectralModel SpectralModel::stable(double alpha, int dim) {
  require_order(alpha, "alpha");
  require_dimension(dim);
  SpectralModel m;
  m.kind_ = ModelKind::stable;
  m.dim_ = dim;
  m.alpha1_ = m.alpha2_ = alpha;
  m.declared_ = {alpha, alpha, 0.0, 1.0, 1.0};
  return m;
}

SpectralModel SpectralModel::relativistic(double alpha, int dim) {
  require_order(alpha, "alpha");
  require_dimension(dim);
  SpectralModel m;
  m.kind_ = ModelKind::relativistic;
  m.dim_ = dim;
  m.alpha1_ = m.alpha2_ = alpha;
  // psi(r)/r^alpha increases to 1, so the upper constant on (1, inf) is 1/psi(1).
  m.declared_ = {alpha, alpha, 1.0, 1.0, 1.0 / (std::pow(2.0, 0.5 * alpha) - 1.0)};
  return m;
}

SpectralModel SpectralModel::stable_sum(double alpha1, double alpha2, int dim) {
  require_order(alpha1, "alpha1");
  require_order(alpha2, "alpha2");
  if (!(alpha1 < alpha2)) throw std::invalid_argument("stable_sum requires alpha1 < alpha2");
  require_dimension(dim);
  SpectralModel m;
  m.kind_ = ModelKind::stable_sum;
  m.dim_ = dim;
  m.alpha1_ = alpha1;
  m.alpha2_ = alpha2;
  m.declared_ = {alpha1, alpha2, 0.0, 1.0, 1.0};
  return m;
}

SpectralModel SpectralModel::tabulated(RadialProfile profile, int dim, ScalingCharacteristics declared) {
  require_dimension(dim);
  validate_profile(profile, dim);
  auto tab = std::make_shared<Tabulated>();
  tab->profile = std::move(profile);
  tab->nu = ProfileInterpolant(tab->profile);
  const auto r = log_space(1e-8, 1e10, 361);
  std::vector<double> lr(r.size()), lp(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double v = radial_exponent_impl(tab->nu, dim, r[i]);
    if (!(v > 0.0)) throw NumericalError("tabulated exponent is not positive at r = " + std::to_string(r[i]));
    lr[i] = std::log(r[i]);
    lp[i] = std::log(v);
  }
  const std::size_t n = lr.size();
  tab->lo_slope = (lp[1] - lp[0]) / (lr[1] - lr[0]);
  tab->hi_slope = (lp[n - 1] - lp[n - 2]) / (lr[n - 1] - lr[n - 2]);
  tab->log_psi = MonotoneCubic(std::move(lr), std::move(lp));

  SpectralModel m;
  m.kind_ = ModelKind::tabulated;
  m.dim_ = dim;
  m.alpha1_ = declared.lower_order;
  m.alpha2_ = declared.upper_order;
  m.declared_ = declared;
  m.table_ = std::move(tab);
  return m;
}

SpectralModel SpectralModel::with_characteristics(ScalingCharacteristics c) const {
  SpectralModel m = *this;
  m.declared_ = c;
  return m;
}

SpectralModel SpectralModel::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("scale factor must be positive");
  SpectralModel m = *this;
  m.scale_ *= c;
  return m;
}

double SpectralModel::psi(double r) const {
  r = std::abs(r);
  if (r == 0.0) return 0.0;
  switch (kind_) {
    case ModelKind::stable:
      return scale_ * std::pow(r, alpha1_);
    case ModelKind::relativistic:
      return scale_ * std::expm1(0.5 * alpha1_ * std::log1p(r * r));
    case ModelKind::stable_sum:
      return scale_ * (std::pow(r, alpha1_) + std::pow(r, alpha2_));
    case ModelKind::tabulated: {
      const double lr = std::log(r);
      const auto& t = *table_;
      double lp;
      if (lr <= t.log_psi.front_x()) {
        lp = t.log_psi.ys().front() + t.lo_slope * (lr - t.log_psi.front_x());
      } else if (lr >= t.log_psi.back_x()) {
        lp = t.log_psi.ys().back() + t.hi_slope * (lr - t.log_psi.back_x());
      } else {
        lp = t.log_psi(lr);
      }
      return scale_ * std::exp(lp);
    }
  }
  return 0.0;
}

double SpectralModel::levy_density(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("Levy density requires r > 0");
  switch (kind_) {
    case ModelKind::stable:
      return scale_ * stable_levy_constant(dim_, alpha1_) * std::pow(r, -dim_ - alpha1_);
    case ModelKind::stable_sum:
      return scale_ * (stable_levy_constant(dim_, alpha1_) * std::pow(r, -dim_ - alpha1_) +
                       stable_levy_constant(dim_, alpha2_) * std::pow(r, -dim_ - alpha2_));
    case ModelKind::relativistic: {
      // Subordinated Brownian motion: nu(r) = int (4 pi u)^{-d/2} e^{-r^2/4u} mu(u) du with the
      // tempered stable subordinator density mu(u) = (a/2)/Gamma(1-a/2) u^{-1-a/2} e^{-u}.
      const double a = 0.5 * alpha1_;
      const double cmu = a / std::tgamma(1.0 - a);
      const double half_d = 0.5 * dim_;
      const auto g = [&](double v) {
        const double u = std::exp(v);
        return std::pow(4.0 * kPi * u, -half_d) * std::exp(-r * r / (4.0 * u) - u) * cmu * std::pow(u, -a);
      };
      const double lo = std::log(r * r / 400.0), hi = std::log(r + 120.0);
      const double mid = std::log(std::max(r * r / (2.0 * dim_ + 2.0 * alpha1_ + 2.0), 1e-300));
      std::vector<double> breaks{lo};
      if (mid > lo && mid < hi) breaks.push_back(mid);
      breaks.push_back(hi);
      return scale_ * integrate_pieces(g, breaks, 1e-12);
    }
    case ModelKind::tabulated:
      return scale_ * table_->nu(r);
  }
  return 0.0;
}

double SpectralModel::psi_inverse(double y) const {
  if (!(y > 0.0)) throw std::invalid_argument("psi_inverse requires y > 0");
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (psi(hi) < y) {
    hi *= 2.0;
    if (++guard > 2000) throw NumericalError("psi appears bounded; cannot invert at " + std::to_string(y));
  }
  while (psi(lo) >= y) {
    lo *= 0.5;
    if (++guard > 4000) throw NumericalError("psi does not vanish at the origin");
  }
  for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-15; ++i) {
    const double mid = std::sqrt(lo * hi);
    (psi(mid) < y ? lo : hi) = mid;
  }
  return hi;
}

double SpectralModel::length_scale(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("length_scale requires t > 0");
  return 1.0 / psi_inverse(1.0 / t);
}

std::string SpectralModel::name() const {
  std::ostringstream o;
  o.precision(6);
  switch (kind_) {
    case ModelKind::stable: o << "stable(alpha=" << alpha1_; break;
    case ModelKind::relativistic: o << "relativistic(alpha=" << alpha1_; break;
    case ModelKind::stable_sum: o << "stable_sum(alpha1=" << alpha1_ << ",alpha2=" << alpha2_; break;
    case ModelKind::tabulated: o << "tabulated(n=" << table_->profile.radius.size(); break;
  }
  o << ",d=" << dim_;
  if (scale_ != 1.0) o << ",scale=" << scale_;
  o << ")";
  return o.str();
}

std::uint64_t SpectralModel::fingerprint() const {
  const std::string n = name();
  std::uint64_t h = fnv1a(n.data(), n.size());
  const double params[3] = {alpha1_, alpha2_, scale_};
  h = fnv1a(params, sizeof(params), h);
  if (table_) {
    h = fnv1a(table_->profile.radius.data(), table_->profile.radius.size() * sizeof(double), h);
    h = fnv1a(table_->profile.density.data(), table_->profile.density.size() * sizeof(double), h);
  }
  return h;
}

const RadialProfile* SpectralModel::profile() const { return table_ ? &table_->profile : nullptr; }

double eval_psi(const SpectralModel& model, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("eval_psi requires r >= 0");
  if (model.kind() == ModelKind::tabulated) {
    return model.scale() * radial_exponent(*model.profile(), model.dimension(), r);
  }
  return model.psi(r);
}

double eval_levy_density(const SpectralModel& model, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("eval_levy_density requires r > 0");
  return model.levy_density(r);
}

double radial_exponent(const RadialProfile& profile, int dim, double r) {
  require_dimension(dim);
  validate_profile(profile, dim);
  return radial_exponent_impl(ProfileInterpolant(profile), dim, r);
}

std::vector<double> default_scaling_grid(const SpectralModel& model, std::size_t n) {
  const double theta = model.characteristics().theta;
  return log_space(std::max(theta, 1e-4), 1e4 * std::max(theta, 1.0), n);
}

ScalingReport check_weak_scaling(const SpectralModel& model, std::span<const double> grid) {
  const auto& c = model.characteristics();
  constexpr double kTol = 1e-9;
  constexpr std::size_t kMaxFailures = 1000;
  const std::size_t n = grid.size();
  if (n < 2) throw std::invalid_argument("scaling grid needs at least 2 points");
  std::vector<double> lower(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("scaling grid must increase");
    const double p = model.psi(grid[i]);
    lower[i] = p / std::pow(grid[i], c.lower_order);
    upper[i] = p / std::pow(grid[i], c.upper_order);
  }
  ScalingReport rep;
  rep.min_lower_ratio = INFINITY;
  rep.max_upper_ratio = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grid[i] > c.theta)) continue;
    ScalingPair lo{grid[i], grid[i], 1.0, c.lower_const, true, true};
    ScalingPair hi{grid[i], grid[i], 1.0, c.upper_const, true, false};
    for (std::size_t j = i; j < n; ++j) {
      const double rl = lower[j] / lower[i];
      const double ru = upper[j] / upper[i];
      if (rl < lo.ratio) lo = {grid[i], grid[j], rl, c.lower_const, true, true};
      if (ru > hi.ratio) hi = {grid[i], grid[j], ru, c.upper_const, true, false};
      if (rl < c.lower_const - kTol && rep.failures.size() < kMaxFailures) {
        rep.failures.push_back({grid[i], grid[j], rl, c.lower_const, false, true});
      }
      if (ru > c.upper_const + kTol && rep.failures.size() < kMaxFailures) {
        rep.failures.push_back({grid[i], grid[j], ru, c.upper_const, false, false});
      }
    }
    lo.pass = lo.ratio >= c.lower_const - kTol;
    hi.pass = hi.ratio <= c.upper_const + kTol;
    rep.min_lower_ratio = std::min(rep.min_lower_ratio, lo.ratio);
    rep.max_upper_ratio = std::max(rep.max_upper_ratio, hi.ratio);
    rep.extremal.push_back(lo);
    rep.extremal.push_back(hi);
  }
  if (rep.extremal.empty()) throw std::invalid_argument("scaling grid has no point above theta");
  rep.lower_pass = rep.min_lower_ratio >= c.lower_const - kTol;
  rep.upper_pass = rep.max_upper_ratio <= c.upper_const + kTol;
  return rep;
}

void ScalingReport::write_csv(std::ostream& out) const {
  out << "condition,r,s,ratio,bound,pass\n";
  const auto row = [&](const ScalingPair& p) {
    out << (p.lower ? "WLSC" : "WUSC") << ',' << p.r << ',' << p.s << ',' << p.ratio << ',' << p.bound << ','
        << (p.pass ? 1 : 0) << '\n';
  };
  const auto old = out.precision(12);
  for (const auto& p : extremal) row(p);
  for (const auto& p : failures) row(p);
  out.precision(old);
}

HartmanWintnerCertificate check_hartman_wintner(const SpectralModel& model, std::size_t n) {
  HartmanWintnerCertificate cert;
  cert.radius = log_space(std::exp(1.0), 1e8, n);
  cert.ratio.resize(n);
  for (std::size_t i = 0; i < n; ++i) cert.ratio[i] = model.psi(cert.radius[i]) / std::log(cert.radius[i]);
  std::vector<double> prefix_max(n, -INFINITY);
  for (std::size_t i = 1; i < n; ++i) prefix_max[i] = std::max(prefix_max[i - 1], cert.ratio[i - 1]);
  std::size_t from = n;
  while (from > 0 && cert.ratio[from - 1] > prefix_max[from - 1]) --from;
  cert.record_from = from;
  cert.granted = from <= n / 2;
  return cert;
}

RadialProfile read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open Levy density profile: " + path);
  RadialProfile p;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream row(line);
    double r, v;
    if (!(row >> r >> v)) continue;  // header
    p.radius.push_back(r);
    p.density.push_back(v);
  }
  return p;
}

SpectralModel model_from_config(const KeyValueConfig& cfg) {
  const std::string kind = cfg.require("model", "kind");
  const int dim = static_cast<int>(cfg.integer_or("model", "dim", 2));
  SpectralModel model = [&] {
    try {
      if (kind == "stable") return SpectralModel::stable(cfg.number("model", "alpha"), dim);
      if (kind == "relativistic") return SpectralModel::relativistic(cfg.number("model", "alpha"), dim);
      if (kind == "stable_sum") {
        return SpectralModel::stable_sum(cfg.number("model", "alpha1"), cfg.number("model", "alpha2"), dim);
      }
      if (kind == "tabulated") {
        ScalingCharacteristics c;
        c.lower_order = cfg.number("model", "lower_order");
        c.upper_order = cfg.number("model", "upper_order");
        c.theta = cfg.number_or("model", "theta", 0.0);
        c.lower_const = cfg.number_or("model", "lower_const", 1.0);
        c.upper_const = cfg.number_or("model", "upper_const", 1.0);
        return SpectralModel::tabulated(read_profile_csv(cfg.require("model", "profile")), dim, c);
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[model] ") + e.what());
    }
    throw ConfigError("[model] unknown kind '" + kind + "'");
  }();
  if (cfg.has("model", "scale")) model = model.scaled(cfg.number("model", "scale"));
  auto c = model.characteristics();
  c.lower_order = cfg.number_or("model", "lower_order", c.lower_order);
  c.upper_order = cfg.number_or("model", "upper_order", c.upper_order);
  c.theta = cfg.number_or("model", "theta", c.theta);
  c.lower_const = cfg.number_or("model", "lower_const", c.lower_const);
  c.upper_const = cfg.number_or("model", "upper_const", c.upper_const);
  return model.with_characteristics(c);
}

}  // namespace levytrace
