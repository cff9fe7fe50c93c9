// SPDX-License-Identifier: Apache-2.0
//
// Per-token angular coordinate grids for image patches and ground-plane cells.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fishrope/angular_coord.hpp"
#include "fishrope/camera.hpp"

namespace fishrope {

/// Angular coordinates at the centers of a regular patch tiling of the image.
///
/// Patch (row, col) spans pixels [col p, min((col+1) p, w)) x [row p, ...);
/// its center is the middle of that span, so full patches sit at
/// ((col + 0.5) p, (row + 0.5) p) and partial edge patches keep their true
/// center. Patches whose center falls outside the image circle are invalid
/// and carry a zero coordinate.
struct PatchGrid {
  int patch_size = 0;
  int rows = 0;
  int cols = 0;
  double theta_max = 0.0;
  std::uint64_t camera_id = 0;
  std::vector<AngularCoord> coords;     // row-major
  std::vector<Eigen::Vector2d> centers;  // pixel coordinates, row-major
  std::vector<bool> valid;

  int size() const { return rows * cols; }
  int index(int row, int col) const { return row * cols + col; }
  int valid_count() const;
};

/// Patch grid through a caller-supplied lookup table.
PatchGrid patch_angles(const KannalaBrandtCamera& camera, const InverseLut& lut, int patch_size);

/// Patch grid through a lookup table built at the default resolution.
PatchGrid patch_angles(const KannalaBrandtCamera& camera, int patch_size);

/// Ground-plane grid centered at `center`: rows run along world y, columns
/// along world x, cell (row, col) has center
///   (cx - X/2 + (col + 0.5) res, cy - Y/2 + (row + 0.5) res, 0).
struct BevGridSpec {
  int rows = 0;
  int cols = 0;
  double resolution = 0.0;  // meters per cell
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  /// Grid covering `x_extent` x `y_extent` meters; throws ConfigError unless
  /// the extents are whole multiples of the resolution (within one cell).
  static BevGridSpec from_extent(double x_extent, double y_extent, double resolution,
                                 Eigen::Vector2d center = Eigen::Vector2d::Zero());

  Eigen::Vector2d extent() const { return {cols * resolution, rows * resolution}; }
  int size() const { return rows * cols; }
  Eigen::Vector3d cell_world(int row, int col) const;
};

struct BevGrid {
  BevGridSpec spec;
  std::uint64_t camera_id = 0;
  std::vector<Eigen::Vector3d> cell_world;  // row-major
  std::vector<AngularCoord> cell_angles;    // zero when not visible
  std::vector<Eigen::Vector2d> cell_pixels;  // KB projection; zero when not visible
  std::vector<bool> visible;

  int size() const { return spec.size(); }
  int visible_count() const;
  double visible_fraction() const { return static_cast<double>(visible_count()) / size(); }
};

/// Angles of every cell on the flat ground z = 0. A cell is visible when it is
/// in front of the camera and its incidence angle is at most theta_max.
BevGrid bev_angles(const BevGridSpec& grid, const KannalaBrandtCamera& camera, const Extrinsics& extrinsics);

}  // namespace fishrope
