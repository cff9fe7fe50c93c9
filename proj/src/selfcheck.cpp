// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "fishrope/experiments.hpp"
#include "fishrope/fixtures.hpp"

namespace fishrope {

bool SelfcheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

constexpr double kPi = std::numbers::pi;

class Suite {
 public:
  explicit Suite(const SelfcheckOptions& options) : options_(options), rng_(options.seed) {}

  SelfcheckReport run() {
    camera_round_trip();
    camera_monotonic();
    camera_paraxial();
    extrinsics_composition();
    angular_radial_symmetry();
    angular_ranges();
    bev_projection_consistency();
    rope_norm();
    rope_relative_identity();
    rope_composition();
    rope_self_logit_max();
    attention_softmax_rows();
    attention_offset_invariance();
    attention_stability();
    attention_gradient();
    bench_wrapper();
    bev_patch_size_monotone();
    report_determinism();
    return std::move(report_);
  }

 private:
  // Pass when measured <= tolerance.
  void bounded(std::string name, double measured, double tolerance, std::string detail = {}) {
    report_.checks.push_back({std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)});
  }
  void boolean(std::string name, bool ok, std::string detail = {}) {
    report_.checks.push_back({std::move(name), ok, ok ? 0.0 : 1.0, 0.0, std::move(detail)});
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Eigen::VectorXd gaussian(int n) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng_);
    return v;
  }
  AngularCoord coord() { return {uniform(0.0, 1.7), uniform(-kPi, kPi)}; }

  void camera_round_trip() {
    double converged = 0.0, fixed = 0.0;
    for (const auto& cam : fixtures::round_trip_cameras()) {
      for (int s = 0; s < 10000; ++s) {
        const double theta = uniform(0.0, cam.theta_max());
        const double phi = uniform(-kPi, kPi);
        const Eigen::Vector2d px = project(cam, theta, phi);
        const AngularCoord a = unproject_converged(cam, px);
        const AngularCoord b = unproject_newton(cam, px);
        // phi is undefined on axis
        const double dphi = theta > 1e-6 ? std::abs(wrap_azimuth(a.phi - phi)) : 0.0;
        converged = std::max({converged, std::abs(a.theta - theta), dphi});
        fixed = std::max(fixed, std::abs(b.theta - theta));
      }
    }
    bounded("camera.round_trip_converged", converged, 1e-9);
    bounded("camera.round_trip_5_iterations", fixed, 1e-5);
  }

  void camera_monotonic() {
    bool ok = true;
    for (const auto& cam : fixtures::round_trip_cameras()) {
      const InverseLut lut = build_lut(cam);
      const auto& e = lut.entries();
      ok = ok && std::adjacent_find(e.begin(), e.end(), std::greater_equal<>()) == e.end();
      for (int i = 0; i + 1 < 1024; ++i) {
        ok = ok && cam.radius(cam.theta_max() * (i + 1) / 1023.0) > cam.radius(cam.theta_max() * i / 1023.0);
      }
    }
    boolean("camera.monotonic", ok);
  }

  void camera_paraxial() {
    double worst = 0.0;
    for (const auto& cam : fixtures::round_trip_cameras()) {
      for (int i = 1; i <= 100; ++i) {
        const double theta = 0.01 * cam.theta_max() * i / 100.0 * (1.0 - 1e-9);
        worst = std::max(worst, std::abs(theta - cam.radius(theta) / cam.coeffs()[0]) / theta);
      }
    }
    bounded("camera.paraxial", worst, 1e-3);
  }

  Eigen::Matrix3d random_rotation() {
    Eigen::Vector4d q = gaussian(4);
    q.normalize();
    return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  }

  void extrinsics_composition() {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      Extrinsics e(random_rotation(), gaussian(3));
      for (int j = 0; j < 50; ++j) e = compose(Extrinsics(random_rotation(), gaussian(3)), e);
      worst = std::max(worst, orthonormality_error(e.rotation()));
    }
    bounded("camera.extrinsics_orthonormal", worst, 1e-9);
  }

  void angular_radial_symmetry() {
    double worst = 0.0;
    for (const auto& cam : fixtures::round_trip_cameras()) {
      const InverseLut lut = build_lut(cam);
      for (int s = 0; s < 1000; ++s) {
        const double r = uniform(0.0, cam.max_radius());
        const double a = uniform(-kPi, kPi), b = uniform(-kPi, kPi);
        const Eigen::Vector2d p1 = cam.principal_point() + r * Eigen::Vector2d(std::cos(a), std::sin(a));
        const Eigen::Vector2d p2 = cam.principal_point() + r * Eigen::Vector2d(std::cos(b), std::sin(b));
        worst = std::max(worst, std::abs(unproject_lut(cam, lut, p1).theta - unproject_lut(cam, lut, p2).theta));
      }
    }
    bounded("angular.radial_symmetry", worst, 1e-12);
  }

  void angular_ranges() {
    bool ok = true;
    for (const auto& cam : fixtures::round_trip_cameras()) {
      for (int p : {8, 14, 32}) {
        const PatchGrid g = patch_angles(cam, p);
        for (int i = 0; i < g.size(); ++i) {
          if (!g.valid[static_cast<std::size_t>(i)]) continue;
          const AngularCoord& c = g.coords[static_cast<std::size_t>(i)];
          ok = ok && c.phi >= -kPi && c.phi < kPi && c.theta >= 0.0 && c.theta <= cam.theta_max();
        }
      }
    }
    boolean("angular.coordinate_ranges", ok);
  }

  void bev_projection_consistency() {
    const BevScene scene = fixtures::bev_scene();
    const Extrinsics oblique = Extrinsics::from_pose(
        Eigen::AngleAxisd(-2.2, Eigen::Vector3d::UnitX()).toRotationMatrix(), {0.0, -3.0, 1.5});
    bool ok = true;
    for (const Extrinsics& ext : {scene.extrinsics, oblique}) {
      const BevGrid g = bev_angles(scene.grid, scene.camera, ext);
      for (int i = 0; i < g.size(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Eigen::Vector3d pc = ext.apply(g.cell_world[ui]);
        const double theta = std::atan2(pc.head<2>().norm(), pc.z());
        const bool inside = pc.z() > 0.0 && theta <= scene.camera.theta_max();
        ok = ok && inside == g.visible[ui];
        if (g.visible[ui]) {
          const AngularCoord& c = g.cell_angles[ui];
          const Eigen::Vector2d px = project(scene.camera, c.theta, c.phi);
          ok = ok && (px - scene.camera.principal_point()).norm() <= scene.camera.max_radius() * (1.0 + 1e-12) &&
               (px - g.cell_pixels[ui]).norm() < 1e-9;
        }
      }
    }
    boolean("angular.bev_projection_consistency", ok);
  }

  RotaryConfig<double> random_config() {
    const int dim = 2 * std::uniform_int_distribution<int>(1, 16)(rng_);
    RotaryConfig<double> c;
    c.dim = dim;
    c.theta_dims = 2 * std::uniform_int_distribution<int>(0, dim / 2)(rng_);
    c.base = uniform(2.0, 20000.0);
    return c;
  }

  void rope_norm() {
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      const RotaryConfig<double> c = random_config();
      const Eigen::VectorXd x = gaussian(c.dim);
      worst = std::max(worst, std::abs(apply_fishrope(x, coord(), c).norm() - x.norm()));
    }
    bounded("rope.norm_preservation", worst, 1e-12);
  }

  void rope_relative_identity() {
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const RotaryConfig<double> c = random_config();
      const Eigen::VectorXd q = gaussian(c.dim), k = gaussian(c.dim);
      const AngularCoord m = coord(), n = coord();
      AngularCoord am = m, an = n;
      if (options_.mutate_rotation_sign) {
        am = {-m.theta, -m.phi};
        an = {-n.theta, -n.phi};
      }
      const double absolute = apply_fishrope(q, am, c).dot(apply_fishrope(k, an, c));
      const double scale = std::max(1.0, q.norm() * k.norm());
      worst = std::max(worst, std::abs(absolute - relative_logit(q, k, n - m, c)) / scale);
    }
    bounded("rope.relative_position_identity", worst, 1e-12, "10000 draws, |abs - rel| / max(1, |q||k|)");
  }

  void rope_composition() {
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      const int dim = 2 * std::uniform_int_distribution<int>(1, 16)(rng_);
      const FrequencySchedule<double> sched = make_schedule(dim, uniform(2.0, 20000.0));
      const Eigen::VectorXd x = gaussian(dim);
      const double a = uniform(-4.0, 4.0), b = uniform(-4.0, 4.0);
      const Eigen::VectorXd two = rotate_pairs(rotate_pairs(x, b, sched), -a, sched);
      worst = std::max(worst, (two - rotate_pairs(x, b - a, sched)).cwiseAbs().maxCoeff());
    }
    bounded("rope.rotation_composition", worst, 1e-12);
  }

  void rope_self_logit_max() {
    double worst = 0.0;
    for (int s = 0; s < 500; ++s) {
      const RotaryConfig<double> c = random_config();
      const Eigen::VectorXd q = gaussian(c.dim);
      const double peak = relative_logit(q, q, AngularCoord{}, c);
      for (int t = 0; t < 20; ++t) {
        const AngularCoord d{uniform(-3.4, 3.4), uniform(-6.3, 6.3)};
        worst = std::max(worst, relative_logit(q, q, d, c) - peak);
      }
    }
    bounded("rope.self_logit_maximal_at_zero", worst, 1e-12);
  }

  TokenGrid random_tokens(int n, int dim, double feature_scale = 1.0) {
    TokenGrid t;
    t.features.resize(n, dim);
    for (int i = 0; i < n; ++i) t.features.row(i) = feature_scale * gaussian(dim).transpose();
    t.pixels.resize(n, 2);
    t.image_size = {1024, 1024};
    for (int i = 0; i < n; ++i) {
      t.angles.push_back(coord());
      t.pixels.row(i) << uniform(0.0, 1024.0), uniform(0.0, 1024.0);
    }
    t.mask.assign(static_cast<std::size_t>(n), true);
    return t;
  }

  ProjectionWeights random_weights(int dim) {
    ProjectionWeights w;
    for (Eigen::MatrixXd* m : {&w.query, &w.key, &w.value}) {
      m->resize(dim, dim);
      for (int r = 0; r < dim; ++r) m->row(r) = gaussian(dim).transpose() / std::sqrt(double(dim));
    }
    return w;
  }

  void attention_softmax_rows() {
    double worst = 0.0;
    bool masked_zero = true;
    for (int s = 0; s < 50; ++s) {
      TokenGrid t = random_tokens(12, 8);
      for (int i = 0; i < 12; i += 3) t.mask[static_cast<std::size_t>(i)] = false;
      const AttentionResult r = self_attention(t, random_weights(8), AttentionConfig::make(Encoding::fishrope, 8));
      const Eigen::MatrixXd& w = r.weights[0];
      for (int i = 0; i < 12; ++i) {
        if (!r.attended[static_cast<std::size_t>(i)]) continue;
        worst = std::max(worst, std::abs(w.row(i).sum() - 1.0));
        for (int j = 0; j < 12; j += 3) masked_zero = masked_zero && w(i, j) == 0.0;
      }
    }
    bounded("attention.softmax_rows_sum_to_one", worst, 1e-12);
    boolean("attention.masked_keys_zero_weight", masked_zero);
  }

  void attention_offset_invariance() {
    double fish = 0.0, axial = 0.0;
    for (int s = 0; s < 50; ++s) {
      TokenGrid q = random_tokens(10, 8), k = random_tokens(12, 8);
      const ProjectionWeights w = random_weights(8);
      const AttentionConfig fc = AttentionConfig::make(Encoding::fishrope, 8);
      const AttentionConfig ac = AttentionConfig::make(Encoding::axial_rope, 8);
      const Eigen::MatrixXd f0 = logit_matrix(q, k, w, fc), a0 = logit_matrix(q, k, w, ac);
      const AngularCoord shift{uniform(-1.0, 1.0), uniform(-3.0, 3.0)};
      const Eigen::RowVector2d pshift(uniform(-300.0, 300.0), uniform(-300.0, 300.0));
      for (TokenGrid* g : {&q, &k}) {
        for (auto& c : g->angles) c = c + shift;
        g->pixels.rowwise() += pshift;
      }
      fish = std::max(fish, (logit_matrix(q, k, w, fc) - f0).cwiseAbs().maxCoeff());
      axial = std::max(axial, (logit_matrix(q, k, w, ac) - a0).cwiseAbs().maxCoeff());
    }
    bounded("attention.fishrope_offset_invariance", fish, 1e-10);
    bounded("attention.axial_pixel_shift_invariance", axial, 1e-10);
  }

  void attention_stability() {
    bool finite = true;
    for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
      const TokenGrid t = random_tokens(6, 8, 1e3);
      const AttentionResult r = self_attention(t, ProjectionWeights::identity(8), AttentionConfig::make(e, 8));
      finite = finite && r.output.allFinite() && r.weights[0].allFinite();
    }
    boolean("attention.finite_for_large_inputs", finite);
  }

  void attention_gradient() {
    double worst = 0.0;
    constexpr double h = 1e-5;
    for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
      for (int s = 0; s < 5; ++s) {
        TokenGrid t = random_tokens(4, 8);
        const ProjectionWeights w = random_weights(8);
        const AttentionConfig c = AttentionConfig::make(e, 8);
        const Eigen::MatrixXd analytic = self_attention_jacobian(t, w, c);
        Eigen::MatrixXd numeric(analytic.rows(), analytic.cols());
        for (int m = 0; m < 4; ++m) {
          for (int b = 0; b < 8; ++b) {
            TokenGrid plus = t, minus = t;
            plus.features(m, b) += h;
            minus.features(m, b) -= h;
            const Eigen::MatrixXd d = (self_attention(plus, w, c).output - self_attention(minus, w, c).output) / (2 * h);
            for (int i = 0; i < 4; ++i) numeric.block(i * 8, m * 8 + b, 8, 1) = d.row(i).transpose();
          }
        }
        const double denom = std::max(1.0, numeric.cwiseAbs().maxCoeff());
        worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / denom);
      }
    }
    bounded("attention.gradient_check", worst, 1e-4, "central differences, step 1e-5");
  }

  void bench_wrapper() {
    // on-axis queries on a distortion-free camera: best_keys == argmax relative_logit
    const KannalaBrandtCamera cam = fixtures::linear_camera();
    const PatchGrid g = patch_angles(cam, 128);
    const int dim = 16;
    const Eigen::RowVectorXd probe = probe_feature(dim).transpose();
    const TokenGrid keys = TokenGrid::from_patches(g, probe.replicate(g.size(), 1), cam.image_size());
    TokenGrid queries;
    queries.features = probe.replicate(20, 1);
    queries.pixels.resize(20, 2);
    queries.image_size = cam.image_size();
    for (int i = 0; i < 20; ++i) {
      const double theta = uniform(0.0, 0.05);
      const double phi = uniform(-kPi, kPi);
      queries.angles.push_back({theta, phi});
      queries.pixels.row(i) = project(cam, theta, phi).transpose();
    }
    queries.mask.assign(20, true);
    const AttentionConfig config = AttentionConfig::make(Encoding::fishrope, dim);
    const std::vector<int> picked = best_keys(queries, keys, ProjectionWeights::identity(dim), config, 7);
    bool ok = true;
    for (int i = 0; i < 20; ++i) {
      double best = -1e300;
      int arg = -1;
      for (int j = 0; j < g.size(); ++j) {
        if (!g.valid[static_cast<std::size_t>(j)]) continue;
        const double l = relative_logit(probe.transpose(), probe.transpose(),
                                        g.coords[static_cast<std::size_t>(j)] - queries.angles[static_cast<std::size_t>(i)],
                                        config.rotary);
        if (l > best) {
          best = l;
          arg = j;
        }
      }
      ok = ok && picked[static_cast<std::size_t>(i)] == arg;
    }
    boolean("experiments.bench_matches_relative_logit", ok);
  }

  void bev_patch_size_monotone() {
    BevScene scene = fixtures::bev_scene();
    scene.grid = BevGridSpec::from_extent(10.0, 10.0, 0.2);
    std::ostringstream detail;
    double previous = 2.0;
    bool ok = true;
    for (int p : {8, 16, 32}) {
      scene.patch_size = p;
      const double acc = bev_roundtrip(scene, Encoding::fishrope, options_.seed).overall.accuracy();
      detail << "p" << p << "=" << acc << " ";
      ok = ok && acc <= previous;
      previous = acc;
    }
    boolean("experiments.bev_accuracy_nonincreasing_in_patch_size", ok, detail.str());
  }

  void report_determinism() {
    RetrievalBenchConfig config{.camera = fixtures::k4_camera()};
    config.patch_size = 64;
    config.n_queries = 200;
    config.seed = options_.seed;
    const BenchReport a = retrieval_bench(config), b = retrieval_bench(config);
    bool ok = a.sets.size() == b.sets.size();
    for (std::size_t s = 0; ok && s < a.sets.size(); ++s) {
      for (std::size_t e = 0; e < a.sets[s].scores.size(); ++e) {
        const EncodingScore &x = a.sets[s].scores[e], &y = b.sets[s].scores[e];
        ok = ok && x.top1 == y.top1 && x.mean_rank == y.mean_rank && x.seam_top1 == y.seam_top1;
      }
    }
    boolean("experiments.bench_deterministic", ok);
  }

  SelfcheckOptions options_;
  std::mt19937_64 rng_;
  SelfcheckReport report_;
};

}  // namespace

SelfcheckReport selfcheck(const SelfcheckOptions& options) { return Suite(options).run(); }

}  // namespace fishrope
