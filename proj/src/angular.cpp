// SPDX-License-Identifier: Apache-2.0
#include "fishrope/angular.hpp"

#include <algorithm>
#include <cmath>

#include "fishrope/errors.hpp"

namespace fishrope {

int PatchGrid::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), true));
}

namespace {

double span_center(int index, int patch_size, int extent) {
  const int begin = index * patch_size;
  const int end = std::min(begin + patch_size, extent);
  return 0.5 * (begin + end);
}

}  // namespace

PatchGrid patch_angles(const KannalaBrandtCamera& camera, const InverseLut& lut, int patch_size) {
  if (patch_size < 1) throw ConfigError("patch size must be at least 1");
  const Eigen::Vector2i size = camera.image_size();
  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.cols = (size.x() + patch_size - 1) / patch_size;
  grid.rows = (size.y() + patch_size - 1) / patch_size;
  grid.theta_max = camera.theta_max();
  grid.camera_id = camera.fingerprint();
  grid.coords.resize(static_cast<std::size_t>(grid.size()));
  grid.centers.resize(static_cast<std::size_t>(grid.size()));
  grid.valid.assign(static_cast<std::size_t>(grid.size()), false);

  const double limit = lut.r_max() * (1.0 + kClampBand);
  for (int row = 0; row < grid.rows; ++row) {
    for (int col = 0; col < grid.cols; ++col) {
      const auto i = static_cast<std::size_t>(grid.index(row, col));
      const Eigen::Vector2d center(span_center(col, patch_size, size.x()), span_center(row, patch_size, size.y()));
      grid.centers[i] = center;
      if ((center - camera.principal_point()).norm() > limit) continue;
      grid.coords[i] = unproject_lut(camera, lut, center);
      grid.valid[i] = true;
    }
  }
  return grid;
}

PatchGrid patch_angles(const KannalaBrandtCamera& camera, int patch_size) {
  return patch_angles(camera, build_lut(camera), patch_size);
}

BevGridSpec BevGridSpec::from_extent(double x_extent, double y_extent, double resolution, Eigen::Vector2d center) {
  if (!(resolution > 0.0)) throw ConfigError("BEV resolution must be positive");
  if (!(x_extent > 0.0 && y_extent > 0.0)) throw ConfigError("BEV extent must be positive");
  BevGridSpec spec;
  spec.cols = static_cast<int>(std::lround(x_extent / resolution));
  spec.rows = static_cast<int>(std::lround(y_extent / resolution));
  if (spec.cols < 1 || spec.rows < 1) throw ConfigError("BEV grid has no cells");
  if (std::abs(spec.cols * resolution - x_extent) > resolution ||
      std::abs(spec.rows * resolution - y_extent) > resolution) {
    throw ConfigError("BEV extent is not a whole number of cells");
  }
  spec.resolution = resolution;
  spec.center = center;
  return spec;
}

Eigen::Vector3d BevGridSpec::cell_world(int row, int col) const {
  const Eigen::Vector2d half = 0.5 * extent();
  return {center.x() - half.x() + (col + 0.5) * resolution, center.y() - half.y() + (row + 0.5) * resolution, 0.0};
}

int BevGrid::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

BevGrid bev_angles(const BevGridSpec& spec, const KannalaBrandtCamera& camera, const Extrinsics& extrinsics) {
  if (spec.rows < 1 || spec.cols < 1 || !(spec.resolution > 0.0)) throw ConfigError("invalid BEV grid");
  BevGrid grid;
  grid.spec = spec;
  grid.camera_id = camera.fingerprint();
  const auto n = static_cast<std::size_t>(spec.size());
  grid.cell_world.resize(n);
  grid.cell_angles.assign(n, AngularCoord{});
  grid.cell_pixels.assign(n, Eigen::Vector2d::Zero());
  grid.visible.assign(n, false);
  for (int row = 0; row < spec.rows; ++row) {
    for (int col = 0; col < spec.cols; ++col) {
      const auto i = static_cast<std::size_t>(row * spec.cols + col);
      grid.cell_world[i] = spec.cell_world(row, col);
      if (!(extrinsics.apply(grid.cell_world[i]).z() > 0.0)) continue;
      const AngularCoord c = world_to_camera_ray(extrinsics, grid.cell_world[i]);
      if (c.theta > camera.theta_max()) continue;
      grid.cell_angles[i] = c;
      grid.cell_pixels[i] = project(camera, c.theta, c.phi);
      grid.visible[i] = true;
    }
  }
  return grid;
}

}  // namespace fishrope
