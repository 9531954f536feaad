#include "levytrace/geometry.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "levytrace/config.hpp"
#include "levytrace/errors.hpp"
#include "levytrace/numerics.hpp"

namespace levytrace {

namespace {

void check_dimension(std::size_t d) {
  if (d < 2 || d > static_cast<std::size_t>(kMaxDimension))
    throw std::invalid_argument("domain dimension must be in [2, " + std::to_string(kMaxDimension) + "]");
}

}  // namespace

Point make_point(std::span<const double> coords) {
  if (coords.size() > static_cast<std::size_t>(kMaxDimension)) throw std::invalid_argument("too many coordinates");
  Point p{};
  for (std::size_t i = 0; i < coords.size(); ++i) p[i] = coords[i];
  return p;
}

SmoothDomain SmoothDomain::ball(std::vector<double> center, double radius) {
  check_dimension(center.size());
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  SmoothDomain d;
  d.kind_ = DomainKind::ball;
  d.dim_ = static_cast<int>(center.size());
  d.center_ = make_point(center);
  d.radius_ = radius;
  return d;
}

SmoothDomain SmoothDomain::half_space(std::vector<double> normal, double offset) {
  check_dimension(normal.size());
  double n2 = 0.0;
  for (double v : normal) n2 += v * v;
  if (!(n2 > 0.0)) throw std::invalid_argument("half-space normal must be nonzero");
  for (double& v : normal) v /= std::sqrt(n2);
  SmoothDomain d;
  d.kind_ = DomainKind::half_space;
  d.dim_ = static_cast<int>(normal.size());
  d.normal_ = make_point(normal);
  d.offset_ = offset;
  return d;
}

double SmoothDomain::smoothness_scale() const noexcept {
  return kind_ == DomainKind::ball ? radius_ : std::numeric_limits<double>::infinity();
}

double SmoothDomain::distance(const Point& x) const noexcept {
  double v;
  if (kind_ == DomainKind::ball) {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
    v = radius_ - std::sqrt(s);
  } else {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += x[i] * normal_[i];
    v = s - offset_;
  }
  return v > 0.0 ? v : 0.0;
}

double SmoothDomain::volume() const { return measures(*this).volume; }
double SmoothDomain::surface() const { return measures(*this).surface; }

double SmoothDomain::inner_layer_boundary(double q) const {
  if (kind_ != DomainKind::ball) throw std::domain_error("inner layer measure needs a bounded domain");
  if (!(q >= 0.0) || !(q < radius_)) throw std::domain_error("inner layer depth must lie in [0, radius)");
  return unit_sphere_area(dim_) * std::pow(radius_ - q, dim_ - 1);
}

Point SmoothDomain::point_at_depth(double q) const {
  Point p{};
  if (kind_ == DomainKind::ball) {
    p = center_;
    p[0] += radius_ - q;
  } else {
    for (int i = 0; i < dim_; ++i) p[i] = normal_[i] * (offset_ + q);
  }
  return p;
}

std::string SmoothDomain::name() const {
  std::ostringstream o;
  o.precision(6);
  if (kind_ == DomainKind::ball) {
    o << "ball(radius=" << radius_ << ",d=" << dim_ << ")";
  } else {
    o << "half_space(offset=" << offset_ << ",d=" << dim_ << ")";
  }
  return o.str();
}

double distance_to_boundary(const SmoothDomain& domain, const Point& x) { return domain.distance(x); }

DomainMeasures measures(const SmoothDomain& domain) {
  if (domain.kind() != DomainKind::ball) throw std::domain_error("a half-space has no finite volume or surface");
  const int d = domain.dimension();
  const double r = domain.radius();
  return {unit_ball_volume(d) * std::pow(r, d), unit_sphere_area(d) * std::pow(r, d - 1)};
}

SmoothDomain domain_from_config(const KeyValueConfig& config, int dim) {
  const std::string kind = config.require("domain", "kind");
  const auto coords = [&](const char* key, std::vector<double> fallback) {
    if (!config.has("domain", key)) return fallback;
    auto v = config.numbers("domain", key);
    if (static_cast<int>(v.size()) != dim)
      throw ConfigError(std::string("[domain] ") + key + " needs " + std::to_string(dim) + " coordinates");
    return v;
  };
  try {
    if (kind == "ball") {
      return SmoothDomain::ball(coords("center", std::vector<double>(dim, 0.0)), config.number_or("domain", "radius", 1.0));
    }
    if (kind == "half_space") {
      std::vector<double> e1(dim, 0.0);
      e1[0] = 1.0;
      return SmoothDomain::half_space(coords("normal", e1), config.number_or("domain", "offset", 0.0));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[domain] ") + e.what());
  }
  throw ConfigError("[domain] unknown kind '" + kind + "' (expected ball or half_space)");
}

}  // namespace levytrace
