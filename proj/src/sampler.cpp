#include "levytrace/sampler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "levytrace/numerics.hpp"

namespace levytrace {

double sample_positive_stable(double beta, Philox& rng) {
  if (beta == 0.5) {
    const double z = rng.normal();
    return 0.5 / (z * z);
  }
  const double u = kPi * rng.uniform();
  const double e = rng.exponential();
  const double a = std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta);
  return a * std::pow(std::sin((1.0 - beta) * u) / e, (1.0 - beta) / beta);
}

IncrementSampler::IncrementSampler(const SpectralModel& model)
    : kind_(model.kind()),
      dim_(model.dimension()),
      beta1_(0.5 * model.alpha()),
      beta2_(0.5 * model.alpha2()),
      scale_(model.scale()) {
  if (!model.samplable())
    throw std::invalid_argument("no exact increment sampler for " + model.name());
  if (dim_ > kMaxDimension) throw std::invalid_argument("sampler supports d <= " + std::to_string(kMaxDimension));
}

IncrementSampler::FixedStep IncrementSampler::fixed(double dt) const {
  FixedStep f;
  f.kind_ = kind_;
  f.dim_ = dim_;
  f.beta1_ = beta1_;
  f.beta2_ = beta2_;
  const double c = scale_ * dt;
  switch (kind_) {
    case ModelKind::stable:
      f.f1_ = std::pow(c, 1.0 / beta1_);
      break;
    case ModelKind::stable_sum:
      f.f1_ = std::pow(c, 1.0 / beta1_);
      f.f2_ = std::pow(c, 1.0 / beta2_);
      break;
    case ModelKind::relativistic:
      // Exponential tilting of the stable subordinator; pieces keep the
      // acceptance probability exp(-c / pieces) above exp(-1/2).
      f.pieces_ = std::max(1, static_cast<int>(std::ceil(2.0 * c)));
      f.f1_ = std::pow(c / f.pieces_, 1.0 / beta1_);
      break;
    case ModelKind::tabulated:
      throw std::logic_error("unsupported model kind in sampler");
  }
  return f;
}

double IncrementSampler::FixedStep::subordinator(Philox& rng) const {
  switch (kind_) {
    case ModelKind::stable:
      return f1_ * sample_positive_stable(beta1_, rng);
    case ModelKind::stable_sum:
      return f1_ * sample_positive_stable(beta1_, rng) + f2_ * sample_positive_stable(beta2_, rng);
    default:
      break;
  }
  double total = 0.0;
  for (int i = 0; i < pieces_; ++i) {
    for (;;) {
      const double s = f1_ * sample_positive_stable(beta1_, rng);
      if (rng.uniform() <= std::exp(-s)) {
        total += s;
        break;
      }
    }
  }
  return total;
}

double IncrementSampler::subordinator(double dt, Philox& rng, std::uint64_t* attempts) const {
  const auto f = fixed(dt);
  if (kind_ != ModelKind::relativistic || !attempts) return f.subordinator(rng);
  double total = 0.0;
  for (int i = 0; i < f.pieces_; ++i) {
    for (;;) {
      ++*attempts;
      const double s = f.f1_ * sample_positive_stable(beta1_, rng);
      if (rng.uniform() <= std::exp(-s)) {
        total += s;
        break;
      }
    }
  }
  return total;
}

double IncrementSampler::acceptance_rate(double dt) const {
  if (kind_ != ModelKind::relativistic) return 1.0;
  const double c = scale_ * dt;
  const int pieces = std::max(1, static_cast<int>(std::ceil(2.0 * c)));
  return std::exp(-c / pieces);
}

Point sample_increment(const SpectralModel& model, double dt, Philox& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be positive");
  return IncrementSampler(model).increment(dt, rng);
}

void SamplerConfig::validate() const {
  if (!(h > 0.0) || !(t_max > 0.0)) throw std::invalid_argument("sampler: h and t_max must be positive");
  if (h > t_max / 64.0 * (1.0 + 1e-12))
    throw std::invalid_argument("sampler: step " + format_double(h) + " exceeds t_max / 64");
  if (paths < 1000) throw std::invalid_argument("sampler: at least 1000 paths required");
}

namespace {

struct NoVisit {
  void operator()(std::size_t, double, const Point&, bool) const noexcept {}
};

}  // namespace

ExitSample sample_exit(const IncrementSampler& sampler, const SmoothDomain& domain, const Point& x0,
                       const SamplerConfig& config, std::uint64_t path) {
  const std::uint64_t stream = config.stream_offset + path;
  Philox rng(config.seed, stream);
  auto out = walk_skeleton(sampler, domain, x0, config.h, config.t_max, config.bias_pair, rng, NoVisit{});
  out.stream = stream;
  out.seed = config.seed;
  return out;
}

ExitSample sample_exit(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                       const SamplerConfig& config, std::uint64_t path) {
  if (domain.dimension() != model.dimension()) throw std::invalid_argument("sample_exit: dimension mismatch");
  if (!domain.contains(x0)) throw std::invalid_argument("sample_exit: start point outside the domain");
  config.validate();
  return sample_exit(IncrementSampler(model), domain, x0, config, path);
}

std::vector<ExitSample> sample_exits(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                                     const SamplerConfig& config, const ExecutionPolicy& policy) {
  if (domain.dimension() != model.dimension()) throw std::invalid_argument("sample_exits: dimension mismatch");
  if (!domain.contains(x0)) throw std::invalid_argument("sample_exits: start point outside the domain");
  config.validate();
  const IncrementSampler sampler(model);
  std::vector<ExitSample> out(config.paths);
  for_each_index(config.paths, policy, [&](std::size_t i) { out[i] = sample_exit(sampler, domain, x0, config, i); });
  return out;
}

double richardson_weight(const SpectralModel& model, double h) {
  const double a = model.length_scale(h), b = model.length_scale(0.5 * h);
  return b / (a - b);
}

double richardson_ks(std::vector<double> coarse, std::vector<double> fine, double w,
                     const std::function<double(double)>& cdf) {
  if (fine.empty() || (w != 0.0 && coarse.empty())) throw std::invalid_argument("richardson_ks: empty sample");
  std::sort(coarse.begin(), coarse.end());
  std::sort(fine.begin(), fine.end());
  const double nc = static_cast<double>(coarse.size()), nf = static_cast<double>(fine.size());
  std::size_t i = 0, j = 0;
  double worst = 0.0, before = 0.0;
  while (j < fine.size() || (w != 0.0 && i < coarse.size())) {
    double x = j < fine.size() ? fine[j] : INFINITY;
    if (w != 0.0 && i < coarse.size()) x = std::min(x, coarse[i]);
    while (j < fine.size() && fine[j] <= x) ++j;
    if (w != 0.0)
      while (i < coarse.size() && coarse[i] <= x) ++i;
    const double ff = j / nf, fc = w != 0.0 ? i / nc : 0.0;
    const double after = ff + w * (ff - fc);
    const double f = cdf(x);
    worst = std::max({worst, std::abs(before - f), std::abs(after - f)});
    before = after;
  }
  return worst;
}

bool TargetSet::contains(const Point& x, int dim) const {
  if (empty) return false;
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
  return s > radius * radius;
}

double jump_intensity_outside_ball(const SpectralModel& m, double R, double u) {
  if (!(u >= 0.0) || !(u < R)) throw std::invalid_argument("jump intensity: need 0 <= u < R");
  const int d = m.dimension();
  const double sigma = unit_sphere_area(d);
  const auto radial = [&](double s) { return m.levy_density(s) * sigma * std::pow(s, d - 1); };
  // Beyond s = R + u the whole sphere around y lies outside the ball.
  const double lo = R + u;
  const auto g = [&](double v) {
    const double s = std::exp(v);
    return radial(s) * s;
  };
  std::vector<double> breaks;
  for (int k = 0; k <= 40; ++k) breaks.push_back(std::log(lo) + 0.5 * k);
  double total = integrate_pieces(g, breaks, 1e-11);
  if (u > 0.0) {
    const double a = 0.5 * (d - 1);
    const auto fraction = [&](double s) {
      const double c = std::clamp((R * R - u * u - s * s) / (2.0 * u * s), -1.0, 1.0);
      const double ib = boost::math::ibeta(0.5, a, c * c);
      return c >= 0.0 ? 0.5 * (1.0 - ib) : 0.5 * (1.0 + ib);
    };
    total += integrate([&](double s) { return radial(s) * fraction(s); }, R - u, R + u, 1e-11);
  }
  return total;
}

MeanSe mean_se(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  const double mean = pairwise_sum(values) / n;
  if (n == 1) return {mean, 0.0};
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  return {mean, std::sqrt(pairwise_sum(sq) / (n - 1) / n)};
}

IkedaWatanabeReport check_ikeda_watanabe(const SpectralModel& model, const SmoothDomain& domain, const Point& x0,
                                         double t1, double t2, const TargetSet& target, const SamplerConfig& config,
                                         const ExecutionPolicy& policy) {
  if (domain.kind() != DomainKind::ball) throw std::invalid_argument("Ikeda-Watanabe check needs a ball domain");
  if (!(0.0 <= t1 && t1 < t2 && t2 <= config.t_max + 1e-12))
    throw std::invalid_argument("Ikeda-Watanabe check: need 0 <= t1 < t2 <= t_max");
  config.validate();
  const int d = domain.dimension();
  IkedaWatanabeReport rep;
  rep.paths = config.paths;
  double offset = 0.0;
  MonotoneCubic J;
  if (!target.empty) {
    for (int i = 0; i < d; ++i) offset += (target.center[i] - domain.center()[i]) * (target.center[i] - domain.center()[i]);
    offset = std::sqrt(offset);
    rep.distance = target.radius - offset - domain.radius();
    const double reach = 2.0 * model.length_scale(config.h);
    if (!(rep.distance > reach))
      throw std::domain_error("Ikeda-Watanabe check: target set at distance " + format_double(rep.distance) +
                              " from the domain, within the skeleton reach " + format_double(reach));
    const double u_max = offset + domain.radius();
    const auto us = log_space(1e-3 * u_max, u_max, 96);
    std::vector<double> xs{0.0}, js{jump_intensity_outside_ball(model, target.radius, 0.0)};
    for (double u : us) {
      xs.push_back(u);
      js.push_back(jump_intensity_outside_ball(model, target.radius, u));
    }
    J = MonotoneCubic(xs, js);
  } else {
    rep.distance = INFINITY;
  }

  const IncrementSampler sampler(model);
  const double h = config.h;
  std::vector<double> diff(config.paths), direct(config.paths), formula(config.paths);
  const auto intensity = [&](const Point& x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (x[i] - target.center[i]) * (x[i] - target.center[i]);
    return J(std::sqrt(s));
  };
  for_each_index(config.paths, policy, [&](std::size_t i) {
    Philox rng(config.seed, config.stream_offset + i);
    double occ = 0.0;
    if (!target.empty && t1 <= 0.0) occ += h * intensity(x0);
    const auto visit = [&](std::size_t, double s, const Point& x, bool) {
      if (!target.empty && s >= t1 - 1e-12 * h && s < t2 - 1e-12 * h) occ += h * intensity(x);
    };
    const auto ex = walk_skeleton(sampler, domain, x0, h, t2, false, rng, visit);
    const bool hit = ex.coarse.exited && ex.coarse.tau > t1 + 1e-12 * h && target.contains(ex.coarse.position, d);
    direct[i] = hit ? 1.0 : 0.0;
    formula[i] = occ;
    diff[i] = direct[i] - occ;
  });
  const auto a = mean_se(direct), b = mean_se(formula), c = mean_se(diff);
  rep.direct = a.mean;
  rep.direct_se = a.se;
  rep.formula = b.mean;
  rep.formula_se = b.se;
  rep.z = c.se > 0.0 ? std::abs(c.mean) / c.se : (c.mean == 0.0 ? 0.0 : INFINITY);
  rep.agree = rep.z <= 3.0;
  return rep;
}

}  // namespace levytrace
