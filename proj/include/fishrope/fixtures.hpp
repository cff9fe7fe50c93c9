// SPDX-License-Identifier: Apache-2.0
//
// Reference cameras and scenes shared by the tests, the benchmarks and the
// CLI. The JSON twins live under data/calib/.
#pragma once

#include <vector>

#include "fishrope/camera.hpp"
#include "fishrope/experiments.hpp"

namespace fishrope::fixtures {

/// Distortion-free model r = 300 theta on a 1024 x 1024 image, 95 deg half FOV.
KannalaBrandtCamera linear_camera();

/// r = 300 theta + 20 theta^3 on a 640 x 480 image, theta_max = 1.6.
KannalaBrandtCamera k2_camera();

/// Four-coefficient model on a 1024 x 1024 image with a 500 px image circle and
/// a center/periphery angular-extent ratio of 4 (tools/make_fixture_camera.py).
KannalaBrandtCamera k4_camera();

std::vector<KannalaBrandtCamera> round_trip_cameras();

/// k4_camera looking straight down from 2 m over a 20 x 20 m grid at 0.2 m
/// per cell, 4 m checkerboard, 8 px patches.
BevScene bev_scene();

}  // namespace fishrope::fixtures
