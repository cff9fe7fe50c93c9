// SPDX-License-Identifier: Apache-2.0
//
// Kannala-Brandt fisheye geometry.
//
// The radial model maps the incidence angle theta (radians) to the image radius
//
//   r(theta) = k1 theta + k2 theta^3 + ... + kK theta^(2K-1)   [pixels]
//
// and the azimuth phi is preserved about the principal point. The optical axis
// is +z of the camera frame; phi is measured from +x towards +y, matching the
// image u (right) and v (down) axes.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fishrope/angular_coord.hpp"

namespace fishrope {

/// Pixels beyond the image circle, as a fraction of r_max, that are clamped to
/// theta_max instead of rejected.
inline constexpr double kClampBand = 1e-3;

/// Fixed Newton iteration count used at inference time.
inline constexpr int kDefaultNewtonIterations = 5;

/// Default resolution of the radius-to-angle lookup table.
inline constexpr int kDefaultLutResolution = 4096;

class KannalaBrandtCamera {
 public:
  /// Validates the model: k1 > 0, theta_max in (0, pi], principal point inside
  /// the image and r'(theta) > 0 on 1024 samples of [0, theta_max].
  KannalaBrandtCamera(std::vector<double> coeffs, Eigen::Vector2d principal_point, double theta_max,
                      Eigen::Vector2i image_size);

  const std::vector<double>& coeffs() const { return coeffs_; }
  const Eigen::Vector2d& principal_point() const { return principal_point_; }
  double theta_max() const { return theta_max_; }
  const Eigen::Vector2i& image_size() const { return image_size_; }

  /// Radius of the image circle, r(theta_max).
  double max_radius() const { return r_max_; }

  /// Forward radial polynomial. No domain check.
  double radius(double theta) const;
  double radius_derivative(double theta) const;

  /// Stable identity of the intrinsic parameters; equal cameras hash equal.
  std::uint64_t fingerprint() const { return fingerprint_; }

  friend bool operator==(const KannalaBrandtCamera& a, const KannalaBrandtCamera& b) {
    return a.fingerprint_ == b.fingerprint_ && a.coeffs_ == b.coeffs_ &&
           a.principal_point_ == b.principal_point_ && a.theta_max_ == b.theta_max_ &&
           a.image_size_ == b.image_size_;
  }

 private:
  std::vector<double> coeffs_;
  Eigen::Vector2d principal_point_;
  double theta_max_;
  Eigen::Vector2i image_size_;
  double r_max_;
  std::uint64_t fingerprint_;
};

/// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
class Extrinsics {
 public:
  Extrinsics() = default;
  /// Throws ConfigError unless `rotation` is orthonormal with det +1 (1e-9).
  Extrinsics(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Extrinsics identity() { return {}; }

  /// Builds the transform from the camera's pose in the world: the columns of
  /// `world_from_camera` are the camera axes in world coordinates.
  static Extrinsics from_pose(const Eigen::Matrix3d& world_from_camera, const Eigen::Vector3d& center);

  /// Camera looking straight down (optical axis -z_world) from `height` above
  /// the world point (x, y, 0). Camera x is world x.
  static Extrinsics looking_down(double height, double x = 0.0, double y = 0.0);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& world_point) const {
    return rotation_ * world_point + translation_;
  }
  Eigen::Vector3d camera_center() const { return -rotation_.transpose() * translation_; }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// `outer` applied after `inner`.
Extrinsics compose(const Extrinsics& outer, const Extrinsics& inner);

/// Deviation of a rotation from orthonormality, max |R^T R - I|.
double orthonormality_error(const Eigen::Matrix3d& rotation);

/// Uniform radius-to-angle table over [0, r_max].
class InverseLut {
 public:
  /// Throws ConfigError unless entries are strictly increasing from 0.
  InverseLut(std::vector<double> entries, double r_max);

  const std::vector<double>& entries() const { return entries_; }
  int resolution() const { return static_cast<int>(entries_.size()); }
  double r_max() const { return r_max_; }
  double theta_max() const { return entries_.back(); }
  double step() const { return r_max_ / static_cast<double>(entries_.size() - 1); }

 private:
  std::vector<double> entries_;
  double r_max_;
};

/// (u, v) of the ray (theta, phi). Throws DomainError for theta outside
/// [0, theta_max].
Eigen::Vector2d project(const KannalaBrandtCamera& camera, double theta, double phi);

/// Incidence angle for a pixel radius using exactly `iterations` Newton steps
/// from the paraxial seed r / k1. Radii in the clamp band return theta_max.
double incidence_from_radius(const KannalaBrandtCamera& camera, double radius, int iterations);

/// Incidence angle for a pixel radius iterated to |step| < tolerance.
double incidence_from_radius_converged(const KannalaBrandtCamera& camera, double radius,
                                       double tolerance = 1e-12, int max_iterations = 50);

/// Inverse projection with a fixed Newton budget.
AngularCoord unproject_newton(const KannalaBrandtCamera& camera, const Eigen::Vector2d& pixel,
                              int iterations = kDefaultNewtonIterations);

/// Inverse projection iterated to full double-precision convergence.
AngularCoord unproject_converged(const KannalaBrandtCamera& camera, const Eigen::Vector2d& pixel);

InverseLut build_lut(const KannalaBrandtCamera& camera, int resolution = kDefaultLutResolution);

/// Linear interpolation in the table. Radii within the clamp band above r_max
/// return theta_max; anything further throws OutOfImageCircleError.
double lut_lookup(const InverseLut& lut, double radius);

/// Inverse projection through the lookup table.
AngularCoord unproject_lut(const KannalaBrandtCamera& camera, const InverseLut& lut,
                           const Eigen::Vector2d& pixel);

/// Angular coordinates of a world point. Throws BehindCameraError when the
/// transformed point has z <= 0.
AngularCoord world_to_camera_ray(const Extrinsics& extrinsics, const Eigen::Vector3d& world_point);

/// Angular change for a fixed pixel offset at the principal point divided by
/// the change for the same offset starting at 0.9 r_max.
double angular_extent_ratio(const KannalaBrandtCamera& camera, double pixel_offset = 1.0);

}  // namespace fishrope
