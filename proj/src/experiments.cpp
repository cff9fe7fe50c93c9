// SPDX-License-Identifier: Apache-2.0
#include "fishrope/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace fishrope {

Eigen::VectorXd probe_feature(int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("probe dim must be positive and even");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; i += 2) x(i) = 1.0;
  return x;
}

const EncodingScore& QuerySetReport::score(Encoding encoding) const {
  for (const auto& s : scores) {
    if (s.encoding == encoding) return s;
  }
  throw ConfigError("encoding '" + std::string(to_string(encoding)) + "' was not benchmarked");
}

const QuerySetReport& BenchReport::set(const std::string& name) const {
  for (const auto& s : sets) {
    if (s.name == name) return s;
  }
  throw ConfigError("no query set named '" + name + "'");
}

const CorrespondenceResult& LiftReport::result(Encoding encoding) const {
  for (const auto& r : results) {
    if (r.encoding == encoding) return r;
  }
  throw ConfigError("encoding '" + std::string(to_string(encoding)) + "' was not lifted");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

TokenGrid probe_tokens(int count, int dim) {
  TokenGrid t;
  t.features = probe_feature(dim).transpose().replicate(count, 1);
  t.angles.assign(static_cast<std::size_t>(count), AngularCoord{});
  t.pixels = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(count, 2);
  t.mask.assign(static_cast<std::size_t>(count), true);
  return t;
}

struct QuerySet {
  std::string name;
  std::vector<AngularCoord> angles;
  std::vector<Eigen::Vector2d> pixels;
};

QuerySet sample_queries(const KannalaBrandtCamera& camera, const std::string& name, double r_lo_fraction, int count,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r_max = camera.max_radius();
  const double lo2 = r_lo_fraction * r_lo_fraction;
  const Eigen::Vector2d size = camera.image_size().cast<double>();
  QuerySet set;
  set.name = name;
  while (static_cast<int>(set.angles.size()) < count) {
    // area-uniform over the annulus [lo, 1] r_max
    const double r = r_max * std::sqrt(lo2 + (1.0 - lo2) * unit(rng));
    const double phi = std::numbers::pi * (2.0 * unit(rng) - 1.0);
    const Eigen::Vector2d pixel = camera.principal_point() + r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
    if ((pixel.array() < 0.0).any() || (pixel.array() > size.array()).any()) continue;
    set.angles.push_back(unproject_converged(camera, pixel));
    set.pixels.push_back(pixel);
  }
  return set;
}

EncodingScore score_encoding(Encoding encoding, const TokenGrid& queries, const TokenGrid& keys,
                             const std::vector<int>& truth, const std::vector<bool>& seam, int dim, double base,
                             std::uint64_t seed) {
  const AttentionConfig config = AttentionConfig::make(encoding, dim, base);
  const ProjectionWeights w = ProjectionWeights::identity(dim);
  const std::vector<int> picked = best_keys(queries, keys, w, config, seed);
  const Eigen::MatrixXd logits = logit_matrix(queries, keys, w, config);

  EncodingScore s;
  s.encoding = encoding;
  int hits = 0, seam_hits = 0, off_hits = 0;
  double rank_sum = 0.0;
  const auto n = static_cast<int>(truth.size());
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const bool hit = picked[ui] == truth[ui];
    hits += hit;
    if (seam[ui]) {
      ++s.seam_queries;
      seam_hits += hit;
    } else {
      off_hits += hit;
    }
    const double target = logits(i, truth[ui]);
    int greater = 0, equal = 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (!keys.mask[static_cast<std::size_t>(j)] || j == truth[ui]) continue;
      if (logits(i, j) > target) ++greater;
      else if (logits(i, j) == target) ++equal;
    }
    rank_sum += 1.0 + greater + 0.5 * equal;
  }
  s.top1 = static_cast<double>(hits) / n;
  s.mean_rank = rank_sum / n;
  s.seam_top1 = s.seam_queries ? static_cast<double>(seam_hits) / s.seam_queries : 0.0;
  s.off_seam_top1 = n - s.seam_queries ? static_cast<double>(off_hits) / (n - s.seam_queries) : 0.0;
  return s;
}

}  // namespace

BenchReport retrieval_bench(const RetrievalBenchConfig& config) {
  if (config.n_queries < 1) throw ConfigError("benchmark needs at least one query");
  if (config.feature_dim < 4 || config.feature_dim % 4 != 0) {
    throw ConfigError("benchmark feature_dim must be a positive multiple of 4");
  }
  if (!(config.periphery_start >= 0.0 && config.periphery_start < 1.0)) {
    throw ConfigError("periphery_start must lie in [0, 1)");
  }
  const auto start = Clock::now();
  const KannalaBrandtCamera& camera = config.camera;
  const PatchGrid grid = patch_angles(camera, build_lut(camera, config.lut_resolution), config.patch_size);

  BenchReport report;
  report.keys = grid.valid_count();
  report.patch_size = config.patch_size;
  report.extent_ratio = angular_extent_ratio(camera);
  report.degenerate_camera = report.extent_ratio <= 1.5;
  if (report.keys == 0) throw ConfigError("no patch center lies inside the image circle");

  TokenGrid keys = TokenGrid::from_patches(
      grid, probe_feature(config.feature_dim).transpose().replicate(grid.size(), 1), camera.image_size());

  std::vector<Eigen::Vector3d> key_rays(static_cast<std::size_t>(grid.size()));
  for (int j = 0; j < grid.size(); ++j) key_rays[static_cast<std::size_t>(j)] = ray_direction(grid.coords[static_cast<std::size_t>(j)]);

  const std::vector<std::pair<std::string, double>> plans{{"uniform", 0.0}, {"periphery", config.periphery_start}};
  for (std::size_t p = 0; p < plans.size(); ++p) {
    const QuerySet qs = sample_queries(camera, plans[p].first, plans[p].second, config.n_queries,
                                       config.seed * 1000003ULL + p);
    TokenGrid queries = probe_tokens(config.n_queries, config.feature_dim);
    queries.angles = qs.angles;
    for (int i = 0; i < config.n_queries; ++i) queries.pixels.row(i) = qs.pixels[static_cast<std::size_t>(i)].transpose();
    queries.image_size = camera.image_size();
    queries.camera_id = camera.fingerprint();

    std::vector<int> truth(static_cast<std::size_t>(config.n_queries));
    std::vector<bool> seam(static_cast<std::size_t>(config.n_queries));
    for (int i = 0; i < config.n_queries; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Eigen::Vector3d ray = ray_direction(qs.angles[ui]);
      double best = -2.0;
      for (int j = 0; j < grid.size(); ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (!grid.valid[uj]) continue;
        const double cosine = ray.dot(key_rays[uj]);
        if (cosine > best) {
          best = cosine;
          truth[ui] = j;
        }
      }
      seam[ui] = std::abs(qs.angles[ui].phi) > std::numbers::pi - config.seam_margin;
    }

    QuerySetReport set;
    set.name = qs.name;
    set.queries = config.n_queries;
    for (Encoding e : config.encodings) {
      set.scores.push_back(score_encoding(e, queries, keys, truth, seam, config.feature_dim, config.base,
                                          config.seed ^ (0x51ed270b27f1a1ULL * (p + 1))));
    }
    report.sets.push_back(std::move(set));
  }
  report.runtime_seconds = seconds_since(start);
  return report;
}

int GroundPattern::label(double x, double y) const {
  if (kind == Kind::uniform) return 0;
  const auto parity = static_cast<long long>(std::floor(x / square_size)) + static_cast<long long>(std::floor(y / square_size));
  return static_cast<int>(((parity % 2) + 2) % 2);
}

namespace {

struct LiftSetup {
  PatchGrid patches;
  BevGrid cells;
  std::vector<int> key_labels;  // -1 where the ray misses the ground
  std::vector<int> cell_labels;
  std::vector<bool> peripheral;
  double peripheral_theta = 0.0;
  int ground_keys = 0;
};

LiftSetup prepare_lift(const BevScene& scene) {
  LiftSetup s;
  s.patches = patch_angles(scene.camera, scene.patch_size);
  s.cells = bev_angles(scene.grid, scene.camera, scene.extrinsics);
  const int visible = s.cells.visible_count();
  if (visible == 0) throw EmptyOverlapError();

  const Eigen::Matrix3d world_from_camera = scene.extrinsics.rotation().transpose();
  const Eigen::Vector3d origin = scene.extrinsics.camera_center();
  s.key_labels.assign(static_cast<std::size_t>(s.patches.size()), -1);
  for (int j = 0; j < s.patches.size(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (!s.patches.valid[uj]) continue;
    const Eigen::Vector3d dir = world_from_camera * ray_direction(s.patches.coords[uj]);
    if (!(dir.z() < 0.0) || !(origin.z() > 0.0)) continue;
    const Eigen::Vector3d hit = origin + (-origin.z() / dir.z()) * dir;
    s.key_labels[uj] = scene.pattern.label(hit.x(), hit.y());
    ++s.ground_keys;
  }

  std::vector<double> thetas;
  s.cell_labels.assign(static_cast<std::size_t>(s.cells.size()), -1);
  for (int i = 0; i < s.cells.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Eigen::Vector3d& p = s.cells.cell_world[ui];
    s.cell_labels[ui] = scene.pattern.label(p.x(), p.y());
    if (s.cells.visible[ui]) thetas.push_back(s.cells.cell_angles[ui].theta);
  }
  const auto band = static_cast<std::size_t>(std::ceil(scene.peripheral_fraction * static_cast<double>(thetas.size())));
  std::sort(thetas.begin(), thetas.end(), std::greater<>());
  s.peripheral_theta = band == 0 ? std::numeric_limits<double>::infinity() : thetas[band - 1];
  s.peripheral.assign(static_cast<std::size_t>(s.cells.size()), false);
  for (int i = 0; i < s.cells.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    s.peripheral[ui] = s.cells.visible[ui] && s.cells.cell_angles[ui].theta >= s.peripheral_theta;
  }
  return s;
}

CorrespondenceResult score_lift(const BevScene& scene, const LiftSetup& s, Encoding encoding, std::uint64_t seed) {
  const int dim = scene.feature_dim;
  const Eigen::RowVectorXd probe = probe_feature(dim).transpose();
  const TokenGrid keys = TokenGrid::from_patches(s.patches, probe.replicate(s.patches.size(), 1), scene.camera.image_size());
  const TokenGrid queries = TokenGrid::from_bev(s.cells, probe.replicate(s.cells.size(), 1), scene.camera.image_size());
  const AttentionConfig config = AttentionConfig::make(encoding, dim, scene.base);
  const std::vector<int> picked = best_keys(queries, keys, ProjectionWeights::identity(dim), config, seed);

  CorrespondenceResult r;
  r.encoding = encoding;
  for (int i = 0; i < s.cells.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!s.cells.visible[ui]) continue;
    const bool hit = s.key_labels[static_cast<std::size_t>(picked[ui])] == s.cell_labels[ui];
    RegionScore& region = s.peripheral[ui] ? r.peripheral : r.central;
    ++region.cells;
    region.correct += hit;
    ++r.overall.cells;
    r.overall.correct += hit;
  }
  return r;
}

}  // namespace

CorrespondenceResult bev_roundtrip(const BevScene& scene, Encoding encoding, std::uint64_t seed) {
  return score_lift(scene, prepare_lift(scene), encoding, seed);
}

LiftReport lift_experiment(const BevScene& scene, const std::vector<Encoding>& encodings, std::uint64_t seed) {
  const auto start = Clock::now();
  const LiftSetup setup = prepare_lift(scene);
  LiftReport report;
  report.visible_cells = setup.cells.visible_count();
  report.keys = setup.patches.valid_count();
  report.ground_keys = setup.ground_keys;
  report.peripheral_theta = setup.peripheral_theta;
  for (Encoding e : encodings) report.results.push_back(score_lift(scene, setup, e, seed));
  report.runtime_seconds = seconds_since(start);
  return report;
}

}  // namespace fishrope
