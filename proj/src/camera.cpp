// SPDX-License-Identifier: Apache-2.0
#include "fishrope/camera.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "fishrope/errors.hpp"

namespace fishrope {
namespace {

constexpr int kMonotonicitySamples = 1024;

class Fnv1a {
 public:
  template <typename T>
  void add(const T& value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (unsigned char b : bytes) {
      hash_ ^= b;
      hash_ *= 1099511628211ULL;
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace

KannalaBrandtCamera::KannalaBrandtCamera(std::vector<double> coeffs, Eigen::Vector2d principal_point,
                                         double theta_max, Eigen::Vector2i image_size)
    : coeffs_(std::move(coeffs)),
      principal_point_(std::move(principal_point)),
      theta_max_(theta_max),
      image_size_(std::move(image_size)) {
  if (coeffs_.empty()) throw ConfigError("camera needs at least one radial coefficient");
  for (double k : coeffs_) {
    if (!std::isfinite(k)) throw DomainError("radial coefficient is not finite", k);
  }
  if (!(coeffs_[0] > 0.0)) throw DomainError("k1 must be positive", coeffs_[0]);
  if (!(theta_max_ > 0.0 && theta_max_ <= std::numbers::pi)) {
    throw DomainError("theta_max must lie in (0, pi]", theta_max_);
  }
  if (image_size_.x() <= 0 || image_size_.y() <= 0) {
    throw ConfigError("image size must be positive");
  }
  if (!(principal_point_.x() >= 0.0 && principal_point_.x() <= image_size_.x())) {
    throw DomainError("principal point c_x lies outside the image", principal_point_.x());
  }
  if (!(principal_point_.y() >= 0.0 && principal_point_.y() <= image_size_.y())) {
    throw DomainError("principal point c_y lies outside the image", principal_point_.y());
  }
  for (int i = 0; i < kMonotonicitySamples; ++i) {
    const double theta = theta_max_ * i / (kMonotonicitySamples - 1);
    if (!(radius_derivative(theta) > 0.0)) {
      throw DomainError("radial polynomial is not strictly increasing at theta", theta);
    }
  }
  r_max_ = radius(theta_max_);

  Fnv1a h;
  for (double k : coeffs_) h.add(k);
  h.add(principal_point_.x());
  h.add(principal_point_.y());
  h.add(theta_max_);
  h.add(image_size_.x());
  h.add(image_size_.y());
  fingerprint_ = h.value();
}

double KannalaBrandtCamera::radius(double theta) const {
  // Horner in theta^2: theta * (k1 + theta^2 (k2 + theta^2 (...)))
  const double t2 = theta * theta;
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t2 + *it;
  return acc * theta;
}

double KannalaBrandtCamera::radius_derivative(double theta) const {
  const double t2 = theta * theta;
  double acc = 0.0;
  for (std::size_t j = coeffs_.size(); j-- > 0;) acc = acc * t2 + static_cast<double>(2 * j + 1) * coeffs_[j];
  return acc;
}

Extrinsics::Extrinsics(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !translation_.allFinite()) {
    throw ConfigError("extrinsics contain non-finite values");
  }
  const double err = orthonormality_error(rotation_);
  if (err > 1e-9) throw ConfigError("rotation is not orthonormal (error " + std::to_string(err) + ")");
  if (std::abs(rotation_.determinant() - 1.0) > 1e-9) {
    throw ConfigError("rotation has determinant " + std::to_string(rotation_.determinant()));
  }
}

Extrinsics Extrinsics::from_pose(const Eigen::Matrix3d& world_from_camera, const Eigen::Vector3d& center) {
  const Eigen::Matrix3d r = world_from_camera.transpose();
  return Extrinsics(r, -r * center);
}

Extrinsics Extrinsics::looking_down(double height, double x, double y) {
  Eigen::Matrix3d axes;
  // columns: camera x, y, z expressed in the world
  axes << 1.0, 0.0, 0.0,
          0.0, -1.0, 0.0,
          0.0, 0.0, -1.0;
  return from_pose(axes, Eigen::Vector3d(x, y, height));
}

Extrinsics compose(const Extrinsics& outer, const Extrinsics& inner) {
  return Extrinsics(outer.rotation() * inner.rotation(),
                    outer.rotation() * inner.translation() + outer.translation());
}

double orthonormality_error(const Eigen::Matrix3d& rotation) {
  return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

InverseLut::InverseLut(std::vector<double> entries, double r_max)
    : entries_(std::move(entries)), r_max_(r_max) {
  if (entries_.size() < 2) throw ConfigError("lookup table needs at least two entries");
  if (!(r_max_ > 0.0)) throw DomainError("lookup table r_max must be positive", r_max_);
  if (entries_.front() != 0.0) throw ConfigError("lookup table must start at theta = 0");
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (!(entries_[i] > entries_[i - 1])) throw ConfigError("lookup table entries must strictly increase");
  }
}

Eigen::Vector2d project(const KannalaBrandtCamera& camera, double theta, double phi) {
  if (!(theta >= 0.0 && theta <= camera.theta_max())) {
    throw DomainError("incidence angle outside [0, theta_max]", theta);
  }
  if (!std::isfinite(phi)) throw DomainError("azimuth is not finite", phi);
  const double r = camera.radius(theta);
  return camera.principal_point() + r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
}

namespace {

// Returns true and sets theta when the radius is resolved without iterating.
bool resolve_trivial_radius(const KannalaBrandtCamera& camera, double radius, double& theta) {
  if (!std::isfinite(radius) || radius < 0.0) throw DomainError("pixel radius is not valid", radius);
  const double r_max = camera.max_radius();
  if (radius > r_max * (1.0 + kClampBand)) throw OutOfImageCircleError(radius, r_max * (1.0 + kClampBand));
  if (radius >= r_max) {
    theta = camera.theta_max();
    return true;
  }
  if (radius == 0.0) {
    theta = 0.0;
    return true;
  }
  return false;
}

double newton_step(const KannalaBrandtCamera& camera, double radius, double theta) {
  return (camera.radius(theta) - radius) / camera.radius_derivative(theta);
}

}  // namespace

double incidence_from_radius(const KannalaBrandtCamera& camera, double radius, int iterations) {
  if (iterations < 1) throw ConfigError("Newton iteration count must be at least 1");
  double theta = 0.0;
  if (resolve_trivial_radius(camera, radius, theta)) return theta;
  theta = std::clamp(radius / camera.coeffs()[0], 0.0, camera.theta_max());
  for (int i = 0; i < iterations; ++i) {
    const double step = newton_step(camera, radius, theta);
    theta = std::clamp(theta - step, 0.0, camera.theta_max());
    if (step == 0.0) break;
  }
  return theta;
}

double incidence_from_radius_converged(const KannalaBrandtCamera& camera, double radius, double tolerance,
                                       int max_iterations) {
  double theta = 0.0;
  if (resolve_trivial_radius(camera, radius, theta)) return theta;
  theta = std::clamp(radius / camera.coeffs()[0], 0.0, camera.theta_max());
  for (int i = 0; i < max_iterations; ++i) {
    const double step = newton_step(camera, radius, theta);
    theta = std::clamp(theta - step, 0.0, camera.theta_max());
    if (std::abs(step) < tolerance) break;
  }
  return theta;
}

namespace {

AngularCoord polar_from_pixel(const KannalaBrandtCamera& camera, const Eigen::Vector2d& pixel, double& radius) {
  if (!pixel.allFinite()) throw DomainError("pixel coordinate is not finite", pixel.x() + pixel.y());
  const Eigen::Vector2d d = pixel - camera.principal_point();
  radius = d.norm();
  AngularCoord c;
  c.phi = radius == 0.0 ? 0.0 : wrap_azimuth(std::atan2(d.y(), d.x()));
  return c;
}

}  // namespace

AngularCoord unproject_newton(const KannalaBrandtCamera& camera, const Eigen::Vector2d& pixel, int iterations) {
  double radius = 0.0;
  AngularCoord c = polar_from_pixel(camera, pixel, radius);
  c.theta = incidence_from_radius(camera, radius, iterations);
  return c;
}

AngularCoord unproject_converged(const KannalaBrandtCamera& camera, const Eigen::Vector2d& pixel) {
  double radius = 0.0;
  AngularCoord c = polar_from_pixel(camera, pixel, radius);
  c.theta = incidence_from_radius_converged(camera, radius);
  return c;
}

InverseLut build_lut(const KannalaBrandtCamera& camera, int resolution) {
  if (resolution < 2) throw ConfigError("lookup table resolution must be at least 2");
  const double r_max = camera.max_radius();
  std::vector<double> entries(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    const double r = r_max * i / (resolution - 1);
    entries[static_cast<std::size_t>(i)] = incidence_from_radius_converged(camera, r);
  }
  entries.back() = camera.theta_max();
  return InverseLut(std::move(entries), r_max);
}

double lut_lookup(const InverseLut& lut, double radius) {
  if (!std::isfinite(radius) || radius < 0.0) throw DomainError("pixel radius is not valid", radius);
  const double limit = lut.r_max() * (1.0 + kClampBand);
  if (radius > limit) throw OutOfImageCircleError(radius, limit);
  const auto& e = lut.entries();
  if (radius >= lut.r_max()) return e.back();
  const double pos = radius / lut.step();
  const auto i = std::min(static_cast<std::size_t>(pos), e.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return e[i] + frac * (e[i + 1] - e[i]);
}

AngularCoord unproject_lut(const KannalaBrandtCamera& camera, const InverseLut& lut, const Eigen::Vector2d& pixel) {
  double radius = 0.0;
  AngularCoord c = polar_from_pixel(camera, pixel, radius);
  c.theta = lut_lookup(lut, radius);
  return c;
}

AngularCoord world_to_camera_ray(const Extrinsics& extrinsics, const Eigen::Vector3d& world_point) {
  if (!world_point.allFinite()) throw DomainError("world point is not finite", world_point.sum());
  const Eigen::Vector3d p = extrinsics.apply(world_point);
  if (!(p.z() > 0.0)) throw BehindCameraError(p.z());
  const double lateral = std::hypot(p.x(), p.y());
  if (lateral == 0.0) return {0.0, 0.0};
  return {std::atan2(lateral, p.z()), wrap_azimuth(std::atan2(p.y(), p.x()))};
}

double angular_extent_ratio(const KannalaBrandtCamera& camera, double pixel_offset) {
  const double r_max = camera.max_radius();
  if (!(pixel_offset > 0.0 && pixel_offset <= 0.1 * r_max)) {
    throw DomainError("pixel offset must lie in (0, 0.1 r_max]", pixel_offset);
  }
  const double center = incidence_from_radius_converged(camera, pixel_offset);
  const double start = 0.9 * r_max;
  const double periphery = incidence_from_radius_converged(camera, start + pixel_offset) -
                           incidence_from_radius_converged(camera, start);
  return center / periphery;
}

}  // namespace fishrope
