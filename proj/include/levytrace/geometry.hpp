#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace levytrace {

class KeyValueConfig;

inline constexpr int kMaxDimension = 8;
using Point = std::array<double, kMaxDimension>;

enum class DomainKind { ball, half_space };

/// Ball or half-space {x : <x, n> > offset}. Both are R-smooth: R is the radius
/// for a ball and +inf for a half-space.
class SmoothDomain {
 public:
  static SmoothDomain ball(std::vector<double> center, double radius);
  static SmoothDomain half_space(std::vector<double> normal, double offset);

  DomainKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dim_; }
  double radius() const noexcept { return radius_; }
  const Point& center() const noexcept { return center_; }
  const Point& normal() const noexcept { return normal_; }
  double offset() const noexcept { return offset_; }
  double smoothness_scale() const noexcept;

  /// dist(x, D^c): positive inside, 0 outside.
  double distance(const Point& x) const noexcept;
  bool contains(const Point& x) const noexcept {
    if (kind_ == DomainKind::ball) {
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
      return s < radius_ * radius_;
    }
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += x[i] * normal_[i];
    return s > offset_;
  }

  double volume() const;
  double surface() const;
  /// |partial D_q|, the surface measure of {x in D : dist(x, D^c) = q}.
  double inner_layer_boundary(double q) const;

  /// Point at depth q on the ray from the center along e_1 (ball), or along the normal.
  Point point_at_depth(double q) const;

  std::string name() const;

 private:
  SmoothDomain() = default;
  DomainKind kind_ = DomainKind::ball;
  int dim_ = 0;
  Point center_{};
  Point normal_{};
  double radius_ = 0.0;
  double offset_ = 0.0;
};

double distance_to_boundary(const SmoothDomain& domain, const Point& x);

struct DomainMeasures {
  double volume;
  double surface;
};

/// (|D|, |partial D|); throws std::domain_error for unbounded domains.
DomainMeasures measures(const SmoothDomain& domain);

/// [domain] section: kind = ball (radius, center) | half_space (normal, offset).
/// Missing center / normal default to the origin / e_1.
SmoothDomain domain_from_config(const KeyValueConfig& config, int dim);

Point make_point(std::span<const double> coords);

}  // namespace levytrace
