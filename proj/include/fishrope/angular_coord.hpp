// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace fishrope {

/// Lens spherical coordinates of a ray: incidence angle from the optical axis
/// and azimuth about it, both in radians.
struct AngularCoord {
  double theta = 0.0;
  double phi = 0.0;

  friend bool operator==(const AngularCoord&, const AngularCoord&) = default;
};

inline AngularCoord operator-(const AngularCoord& a, const AngularCoord& b) {
  return {a.theta - b.theta, a.phi - b.phi};
}

inline AngularCoord operator+(const AngularCoord& a, const AngularCoord& b) {
  return {a.theta + b.theta, a.phi + b.phi};
}

/// Maps an azimuth into [-pi, pi).
inline double wrap_azimuth(double phi) {
  constexpr double pi = std::numbers::pi;
  double wrapped = std::remainder(phi, 2.0 * pi);
  if (wrapped >= pi) wrapped -= 2.0 * pi;
  return wrapped;
}

/// Unit ray in the camera frame (optical axis +z).
inline Eigen::Vector3d ray_direction(const AngularCoord& c) {
  const double s = std::sin(c.theta);
  return {s * std::cos(c.phi), s * std::sin(c.phi), std::cos(c.theta)};
}

/// Great-circle angle between two rays.
inline double great_circle_distance(const AngularCoord& a, const AngularCoord& b) {
  const Eigen::Vector3d da = ray_direction(a);
  const Eigen::Vector3d db = ray_direction(b);
  return std::atan2(da.cross(db).norm(), da.dot(db));
}

}  // namespace fishrope
