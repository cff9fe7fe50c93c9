// SPDX-License-Identifier: Apache-2.0
#include "fishrope/fixtures.hpp"

#include <numbers>

namespace fishrope::fixtures {
namespace {

constexpr double kTheta95 = 95.0 * std::numbers::pi / 180.0;

}  // namespace

KannalaBrandtCamera linear_camera() {
  return KannalaBrandtCamera({300.0}, {512.0, 512.0}, kTheta95, {1024, 1024});
}

KannalaBrandtCamera k2_camera() {
  return KannalaBrandtCamera({300.0, 20.0}, {320.0, 240.0}, 1.6, {640, 480});
}

KannalaBrandtCamera k4_camera() {
  return KannalaBrandtCamera({142.95571166506267, 61.228854871972295, -2.8591142333012534, 0.5718228466602506},
                             {512.0, 512.0}, kTheta95, {1024, 1024});
}

std::vector<KannalaBrandtCamera> round_trip_cameras() { return {linear_camera(), k2_camera(), k4_camera()}; }

BevScene bev_scene() {
  return BevScene{
      .camera = k4_camera(),
      .extrinsics = Extrinsics::looking_down(2.0),
      .grid = BevGridSpec::from_extent(20.0, 20.0, 0.2),
      .pattern = GroundPattern{GroundPattern::Kind::checkerboard, 4.0},
      .patch_size = 8,
  };
}

}  // namespace fishrope::fixtures
