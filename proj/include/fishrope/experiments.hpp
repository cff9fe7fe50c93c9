// SPDX-License-Identifier: Apache-2.0
//
// Training-free experiments built on probe features: every token carries the
// same feature vector, so the max-logit key is decided by positions alone.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fishrope/angular.hpp"
#include "fishrope/attention.hpp"
#include "fishrope/camera.hpp"
#include "fishrope/errors.hpp"

namespace fishrope {

class EmptyOverlapError : public Error {
 public:
  EmptyOverlapError() : Error("no BEV cell is visible from the camera") {}
};

/// Unit vector in every rotation plane: pairs (1, 0).
Eigen::VectorXd probe_feature(int dim);

// ---------------------------------------------------------------------------
// Angular retrieval benchmark.

struct RetrievalBenchConfig {
  KannalaBrandtCamera camera;
  int patch_size = 32;
  int n_queries = 2000;
  std::uint64_t seed = 1;
  std::vector<Encoding> encodings{Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope};
  int feature_dim = 32;
  double base = 10000.0;
  /// Periphery-weighted queries are area-uniform in r in [start r_max, r_max].
  double periphery_start = 0.7;
  /// Queries with |phi| > pi - margin count as seam queries.
  double seam_margin = 0.1;
  int lut_resolution = kDefaultLutResolution;
};

struct EncodingScore {
  Encoding encoding = Encoding::none;
  double top1 = 0.0;
  /// Mean rank of the true nearest key under the encoding's logits (1 = best,
  /// ties share the mid rank).
  double mean_rank = 0.0;
  int seam_queries = 0;
  double seam_top1 = 0.0;
  double off_seam_top1 = 0.0;
};

struct QuerySetReport {
  std::string name;
  int queries = 0;
  std::vector<EncodingScore> scores;

  const EncodingScore& score(Encoding encoding) const;
};

struct BenchReport {
  int keys = 0;
  int patch_size = 0;
  double extent_ratio = 0.0;
  /// Set when the extent ratio is at most 1.5: the camera barely distorts.
  bool degenerate_camera = false;
  std::vector<QuerySetReport> sets;  // "uniform", then "periphery"
  double runtime_seconds = 0.0;

  const QuerySetReport& set(const std::string& name) const;
};

/// Keys are the valid patch centers, each query a probe at a random pixel of
/// the image circle. A query scores when its max-logit key is the key with the
/// smallest great-circle separation. Deterministic given the seed.
BenchReport retrieval_bench(const RetrievalBenchConfig& config);

// ---------------------------------------------------------------------------
// Ground-plane round trip.

struct GroundPattern {
  enum class Kind { uniform, checkerboard };
  Kind kind = Kind::uniform;
  double square_size = 1.0;

  int label(double x, double y) const;
};

struct BevScene {
  KannalaBrandtCamera camera;
  Extrinsics extrinsics;
  BevGridSpec grid;
  GroundPattern pattern;
  int patch_size = 8;
  int feature_dim = 32;
  double base = 10000.0;
  /// Visible cells with the largest incidence angles forming this fraction
  /// make up the peripheral band.
  double peripheral_fraction = 0.3;
};

struct RegionScore {
  int cells = 0;
  int correct = 0;
  double accuracy() const { return cells == 0 ? 0.0 : static_cast<double>(correct) / cells; }
};

struct CorrespondenceResult {
  Encoding encoding = Encoding::fishrope;
  RegionScore overall;
  RegionScore central;
  RegionScore peripheral;
};

struct LiftReport {
  int visible_cells = 0;
  int keys = 0;
  /// Keys whose ray meets the ground.
  int ground_keys = 0;
  /// Smallest incidence angle inside the peripheral band.
  double peripheral_theta = 0.0;
  std::vector<CorrespondenceResult> results;
  double runtime_seconds = 0.0;

  const CorrespondenceResult& result(Encoding encoding) const;
};

/// Labels every patch by intersecting its center ray with z = 0, retrieves
/// the max-logit patch for every visible cell under `encoding`, and scores
/// label agreement. Throws EmptyOverlapError when no cell is visible.
CorrespondenceResult bev_roundtrip(const BevScene& scene, Encoding encoding, std::uint64_t seed = 0);

LiftReport lift_experiment(const BevScene& scene, const std::vector<Encoding>& encodings, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Invariant suite.

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelfcheckReport {
  std::vector<CheckResult> checks;

  bool passed() const;
};

struct SelfcheckOptions {
  std::uint64_t seed = 20240601;
  /// Mutation fixture: negates every absolute rotation so the relative
  /// position identity must fail.
  bool mutate_rotation_sign = false;
};

SelfcheckReport selfcheck(const SelfcheckOptions& options = {});

}  // namespace fishrope
