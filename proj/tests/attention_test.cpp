// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fishrope/attention.hpp"
#include "fishrope/errors.hpp"
#include "fishrope/fixtures.hpp"
#include "oracles.hpp"

using namespace fishrope;

namespace {

TokenGrid random_tokens(std::mt19937_64& rng, int n, int dim) {
  std::uniform_real_distribution<double> t(0.0, 1.6), p(-3.14, 3.14), px(0.0, 640.0);
  TokenGrid g;
  g.features.resize(n, dim);
  g.pixels.resize(n, 2);
  g.image_size = {640, 480};
  for (int i = 0; i < n; ++i) {
    g.features.row(i) = oracle::gaussian(rng, dim).transpose();
    g.angles.push_back({t(rng), p(rng)});
    g.pixels.row(i) << px(rng), 0.75 * px(rng);
  }
  g.mask.assign(static_cast<std::size_t>(n), true);
  return g;
}

ProjectionWeights random_weights(std::mt19937_64& rng, int out, int in) {
  ProjectionWeights w;
  for (Eigen::MatrixXd* m : {&w.query, &w.key, &w.value}) {
    m->resize(out, in);
    for (int r = 0; r < out; ++r) m->row(r) = oracle::gaussian(rng, in).transpose() / std::sqrt(double(in));
  }
  return w;
}

// Per-token rotation as a dense matrix, independent of the library.
Eigen::MatrixXd token_rotation(const TokenGrid& t, int i, const AttentionConfig& c) {
  const int d = c.head_dim, td = c.rotary.theta_dims;
  if (c.encoding == Encoding::fishrope) {
    return oracle::block_rotation(d, td, c.rotary.base, t.angles[static_cast<std::size_t>(i)].theta,
                                  t.angles[static_cast<std::size_t>(i)].phi);
  }
  if (c.encoding == Encoding::axial_rope) {
    return oracle::block_rotation(d, td, c.rotary.base, t.pixels(i, 0) / t.image_size.x(),
                                  t.pixels(i, 1) / t.image_size.y());
  }
  return Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(Encoding, Names) {
  for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
    EXPECT_EQ(parse_encoding(to_string(e)), e);
  }
  EXPECT_THROW(parse_encoding("learned"), ConfigError);
}

TEST(AttentionConfig, Validation) {
  AttentionConfig c = AttentionConfig::make(Encoding::fishrope, 8);
  EXPECT_DOUBLE_EQ(c.scale(), 1.0 / std::sqrt(8.0));
  c.temperature = 0.5;
  EXPECT_EQ(c.scale(), 0.5);
  c.rotary.dim = 6;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SelfAttention, SingleToken) {
  std::mt19937_64 rng(1);
  const TokenGrid t = random_tokens(rng, 1, 8);
  const ProjectionWeights w = random_weights(rng, 8, 8);
  for (Encoding e : {Encoding::none, Encoding::fishrope}) {
    const AttentionResult r = self_attention(t, w, AttentionConfig::make(e, 8));
    EXPECT_LT((r.output.row(0).transpose() - w.value * t.features.row(0).transpose()).norm(), 1e-14);
  }
}

TEST(SelfAttention, IdenticalTokensUniform) {
  TokenGrid t;
  t.features = Eigen::MatrixXd::Ones(2, 4);
  t.angles = {{0.1, 0.2}, {0.9, -1.0}};
  t.pixels = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(2, 2);
  t.mask = {true, true};
  const AttentionResult r = self_attention(t, ProjectionWeights::identity(4), AttentionConfig::make(Encoding::none, 4));
  EXPECT_DOUBLE_EQ(r.weights[0](0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.weights[0](1, 0), 0.5);
}

TEST(SelfAttention, MatchesReferenceLoop) {
  std::mt19937_64 rng(2);
  for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
    const TokenGrid t = random_tokens(rng, 7, 8);
    const ProjectionWeights w = random_weights(rng, 8, 8);
    const AttentionConfig c = AttentionConfig::make(e, 8);
    Eigen::MatrixXd x = t.features;
    if (e == Encoding::sinusoidal) {
      for (int i = 0; i < 7; ++i) {
        const double u = t.pixels(i, 0) / 640.0, v = t.pixels(i, 1) / 480.0;
        for (int a = 0; a < 2; ++a) {
          for (int p = 0; p < 2; ++p) {
            const double wf = std::pow(10000.0, -2.0 * p / 4.0);
            x(i, 4 * a + 2 * p) += std::sin((a ? v : u) * wf);
            x(i, 4 * a + 2 * p + 1) += std::cos((a ? v : u) * wf);
          }
        }
      }
    }
    Eigen::MatrixXd q(7, 8), k(7, 8), v(7, 8);
    for (int i = 0; i < 7; ++i) {
      const Eigen::MatrixXd r = token_rotation(t, i, c);
      q.row(i) = (r * w.query * x.row(i).transpose()).transpose();
      k.row(i) = (r * w.key * x.row(i).transpose()).transpose();
      v.row(i) = (w.value * x.row(i).transpose()).transpose();
    }
    const Eigen::MatrixXd want = oracle::attention_output(q, k, v, 1.0 / std::sqrt(8.0));
    EXPECT_LT((self_attention(t, w, c).output - want).cwiseAbs().maxCoeff(), 1e-12) << to_string(e);
  }
}

TEST(SelfAttention, MaskedKeysGetZeroWeight) {
  std::mt19937_64 rng(3);
  TokenGrid t = random_tokens(rng, 6, 8);
  t.mask[1] = t.mask[4] = false;
  const AttentionResult r = self_attention(t, random_weights(rng, 8, 8), AttentionConfig::make(Encoding::fishrope, 8));
  for (int i = 0; i < 6; ++i) {
    if (!t.mask[static_cast<std::size_t>(i)]) {
      EXPECT_FALSE(r.attended[static_cast<std::size_t>(i)]);
      EXPECT_EQ(r.output.row(i).norm(), 0.0);
      continue;
    }
    EXPECT_NEAR(r.weights[0].row(i).sum(), 1.0, 1e-12);
    EXPECT_EQ(r.weights[0](i, 1), 0.0);
    EXPECT_EQ(r.weights[0](i, 4), 0.0);
  }
}

TEST(SelfAttention, AllMaskedThrows) {
  std::mt19937_64 rng(4);
  TokenGrid t = random_tokens(rng, 3, 8);
  t.mask.assign(3, false);
  EXPECT_THROW(self_attention(t, ProjectionWeights::identity(8), AttentionConfig::make(Encoding::none, 8)),
               EmptyAttentionError);
}

TEST(SelfAttention, ShapeErrors) {
  std::mt19937_64 rng(5);
  TokenGrid t = random_tokens(rng, 3, 8);
  EXPECT_THROW(self_attention(t, ProjectionWeights::identity(6), AttentionConfig::make(Encoding::none, 8)), ShapeError);
  t.mask.pop_back();
  EXPECT_THROW(self_attention(t, ProjectionWeights::identity(8), AttentionConfig::make(Encoding::none, 8)), ShapeError);
}

TEST(SelfAttention, LargeInputsStayFinite) {
  std::mt19937_64 rng(6);
  TokenGrid t = random_tokens(rng, 5, 8);
  t.features *= 1e3;
  for (Encoding e : {Encoding::none, Encoding::fishrope}) {
    const AttentionResult r = self_attention(t, ProjectionWeights::identity(8), AttentionConfig::make(e, 8));
    EXPECT_TRUE(r.output.allFinite());
    EXPECT_TRUE(r.weights[0].allFinite());
  }
}

TEST(SelfAttention, MultiHead) {
  std::mt19937_64 rng(7);
  const TokenGrid t = random_tokens(rng, 5, 6);
  AttentionConfig c = AttentionConfig::make(Encoding::fishrope, 4);
  c.heads = 2;
  const ProjectionWeights w = random_weights(rng, 8, 6);
  const AttentionResult r = self_attention(t, w, c);
  ASSERT_EQ(r.output.cols(), 8);
  for (int h = 0; h < 2; ++h) {
    Eigen::MatrixXd q(5, 4), k(5, 4), v(5, 4);
    for (int i = 0; i < 5; ++i) {
      const Eigen::MatrixXd rot = token_rotation(t, i, c);
      q.row(i) = (rot * w.query.middleRows(4 * h, 4) * t.features.row(i).transpose()).transpose();
      k.row(i) = (rot * w.key.middleRows(4 * h, 4) * t.features.row(i).transpose()).transpose();
      v.row(i) = (w.value.middleRows(4 * h, 4) * t.features.row(i).transpose()).transpose();
    }
    EXPECT_LT((r.output.middleCols(4 * h, 4) - oracle::attention_output(q, k, v, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
    TokenGrid t = random_tokens(rng, 4, 8);
    const ProjectionWeights w = random_weights(rng, 8, 8);
    const AttentionConfig c = AttentionConfig::make(e, 8);
    auto f = [&](const Eigen::VectorXd& flat) {
      TokenGrid u = t;
      u.features = flat.reshaped<Eigen::RowMajor>(4, 8);
      const Eigen::MatrixXd out = self_attention(u, w, c).output;
      return Eigen::VectorXd(out.reshaped<Eigen::RowMajor>());
    };
    const Eigen::VectorXd x = t.features.reshaped<Eigen::RowMajor>();
    const Eigen::MatrixXd numeric = oracle::central_jacobian(f, x, 1e-5);
    const Eigen::MatrixXd analytic = self_attention_jacobian(t, w, c);
    const double err = (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1.0, numeric.cwiseAbs().maxCoeff());
    EXPECT_LT(err, 1e-4) << to_string(e);
  }
}

TEST(Jacobian, MaskedTokensHaveZeroRows) {
  std::mt19937_64 rng(9);
  TokenGrid t = random_tokens(rng, 4, 8);
  t.mask[2] = false;
  const Eigen::MatrixXd j = self_attention_jacobian(t, random_weights(rng, 8, 8), AttentionConfig::make(Encoding::fishrope, 8));
  EXPECT_EQ(j.middleRows(16, 8).norm(), 0.0);
  EXPECT_EQ(j.middleCols(16, 8).norm(), 0.0);
}

TEST(Logits, NoneIsScaledDot) {
  std::mt19937_64 rng(10);
  const TokenGrid q = random_tokens(rng, 3, 8), k = random_tokens(rng, 5, 8);
  const ProjectionWeights w = ProjectionWeights::identity(8);
  const Eigen::MatrixXd l = logit_matrix(q, k, w, AttentionConfig::make(Encoding::none, 8));
  EXPECT_LT((l - q.features * k.features.transpose() / std::sqrt(8.0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Logits, OffsetInvariance) {
  std::mt19937_64 rng(11);
  TokenGrid q = random_tokens(rng, 6, 8), k = random_tokens(rng, 9, 8);
  const ProjectionWeights w = random_weights(rng, 8, 8);
  const AttentionConfig fc = AttentionConfig::make(Encoding::fishrope, 8);
  const AttentionConfig ac = AttentionConfig::make(Encoding::axial_rope, 8);
  const Eigen::MatrixXd f0 = logit_matrix(q, k, w, fc), a0 = logit_matrix(q, k, w, ac);
  for (TokenGrid* g : {&q, &k}) {
    for (auto& c : g->angles) c = c + AngularCoord{0.37, -2.1};
    g->pixels.rowwise() += Eigen::RowVector2d(-55.0, 310.0);
  }
  EXPECT_LT((logit_matrix(q, k, w, fc) - f0).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((logit_matrix(q, k, w, ac) - a0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CrossAttention, ExactMatchGetsMaxLogit) {
  const auto cam = fixtures::k4_camera();
  const PatchGrid patches = patch_angles(cam, 64);
  Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(16);
  for (int i = 0; i < 16; i += 2) f(i) = 1.0;
  const TokenGrid keys = TokenGrid::from_patches(patches, f.replicate(patches.size(), 1), cam.image_size());
  const int target = patches.index(5, 9);
  TokenGrid q;
  q.features = f;
  q.angles = {patches.coords[static_cast<std::size_t>(target)]};
  q.pixels = patches.centers[static_cast<std::size_t>(target)].transpose();
  q.image_size = cam.image_size();
  q.mask = {true};
  const AttentionConfig c = AttentionConfig::make(Encoding::fishrope, 16);
  const Eigen::MatrixXd l = logit_matrix(q, keys, ProjectionWeights::identity(16), c);
  Eigen::Index arg = -1;
  double best = -1e300;
  for (Eigen::Index j = 0; j < l.cols(); ++j) {
    if (keys.mask[static_cast<std::size_t>(j)] && l(0, j) > best) {
      best = l(0, j);
      arg = j;
    }
  }
  EXPECT_EQ(arg, target);
  EXPECT_EQ(best_keys(q, keys, ProjectionWeights::identity(16), c)[0], target);
}

TEST(CrossAttention, AllKeysMaskedGivesZeroAndFlag) {
  std::mt19937_64 rng(12);
  const TokenGrid q = random_tokens(rng, 3, 8);
  TokenGrid k = random_tokens(rng, 4, 8);
  k.mask.assign(4, false);
  const AttentionResult r = cross_attention(q, k, ProjectionWeights::identity(8), AttentionConfig::make(Encoding::fishrope, 8));
  for (int i = 0; i < 3; ++i) EXPECT_FALSE(r.attended[static_cast<std::size_t>(i)]);
  EXPECT_EQ(r.output.norm(), 0.0);
}

TEST(CrossAttention, CameraMismatch) {
  std::mt19937_64 rng(13);
  TokenGrid q = random_tokens(rng, 3, 8), k = random_tokens(rng, 4, 8);
  q.camera_id = 1;
  k.camera_id = 2;
  EXPECT_THROW(cross_attention(q, k, ProjectionWeights::identity(8), AttentionConfig::make(Encoding::fishrope, 8)),
               ConfigError);
  q.mask.assign(3, false);
  k.camera_id = 1;
  EXPECT_THROW(cross_attention(q, k, ProjectionWeights::identity(8), AttentionConfig::make(Encoding::fishrope, 8)),
               EmptyAttentionError);
}

TEST(CrossAttention, BruteForceLogits) {
  std::mt19937_64 rng(14);
  const BevScene scene = fixtures::bev_scene();
  const BevGrid bev = bev_angles(BevGridSpec::from_extent(2.0, 2.0, 0.2), scene.camera, scene.extrinsics);
  const PatchGrid patches = patch_angles(scene.camera, 128);
  const int d = 8;
  Eigen::MatrixXd fq(bev.size(), d), fk(patches.size(), d);
  for (int i = 0; i < bev.size(); ++i) fq.row(i) = oracle::gaussian(rng, d).transpose();
  for (int i = 0; i < patches.size(); ++i) fk.row(i) = oracle::gaussian(rng, d).transpose();
  const TokenGrid q = TokenGrid::from_bev(bev, fq, scene.camera.image_size());
  const TokenGrid k = TokenGrid::from_patches(patches, fk, scene.camera.image_size());
  const ProjectionWeights w = random_weights(rng, d, d);
  const AttentionConfig c = AttentionConfig::make(Encoding::fishrope, d);
  const Eigen::MatrixXd l = logit_matrix(q, k, w, c);
  for (int i = 0; i < q.size(); ++i) {
    for (int j = 0; j < k.size(); ++j) {
      const Eigen::VectorXd qi = w.query * fq.row(i).transpose(), kj = w.key * fk.row(j).transpose();
      const AngularCoord delta = k.angles[static_cast<std::size_t>(j)] - q.angles[static_cast<std::size_t>(i)];
      EXPECT_NEAR(l(i, j), c.scale() * relative_logit(qi, kj, delta, c.rotary), 1e-10);
    }
  }
}

TEST(BestKeys, TiesAreSeededAndMaskedQueriesSkipped) {
  TokenGrid k;
  k.features = Eigen::MatrixXd::Ones(6, 4);
  k.angles.assign(6, AngularCoord{});
  k.pixels = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(6, 2);
  k.mask = {true, true, false, true, true, true};
  TokenGrid q = k;
  const AttentionConfig c = AttentionConfig::make(Encoding::none, 4);
  const auto a = best_keys(q, k, ProjectionWeights::identity(4), c, 42);
  EXPECT_EQ(a, best_keys(q, k, ProjectionWeights::identity(4), c, 42));
  EXPECT_EQ(a[2], -1);
  std::set<int> picks;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const int p = best_keys(q, k, ProjectionWeights::identity(4), c, s)[0];
    EXPECT_NE(p, 2);
    picks.insert(p);
  }
  EXPECT_GT(picks.size(), 1u);
}
