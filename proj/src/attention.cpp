// SPDX-License-Identifier: Apache-2.0
#include "fishrope/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fishrope/errors.hpp"

namespace fishrope {

std::string_view to_string(Encoding encoding) {
  switch (encoding) {
    case Encoding::none: return "none";
    case Encoding::sinusoidal: return "sinusoidal";
    case Encoding::axial_rope: return "axial_rope";
    case Encoding::fishrope: return "fishrope";
  }
  return "unknown";
}

Encoding parse_encoding(std::string_view name) {
  for (Encoding e : {Encoding::none, Encoding::sinusoidal, Encoding::axial_rope, Encoding::fishrope}) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("unknown encoding '" + std::string(name) + "'");
}

AttentionConfig AttentionConfig::make(Encoding encoding, int head_dim, double base) {
  AttentionConfig c;
  c.head_dim = head_dim;
  c.encoding = encoding;
  c.rotary = RotaryConfig<double>::equal_split(head_dim, base);
  c.sinusoidal_base = base;
  return c;
}

double AttentionConfig::scale() const {
  return temperature ? *temperature : 1.0 / std::sqrt(static_cast<double>(head_dim));
}

void AttentionConfig::validate() const {
  if (heads < 1) throw ConfigError("attention needs at least one head");
  if (head_dim < 1) throw ConfigError("head_dim must be positive");
  if (rotary_encoding()) {
    rotary.validate();
    if (rotary.dim != head_dim) {
      throw ConfigError("rotary dim " + std::to_string(rotary.dim) + " does not match head_dim " +
                        std::to_string(head_dim));
    }
  }
  if (temperature && !std::isfinite(*temperature)) throw ConfigError("temperature must be finite");
}

ProjectionWeights ProjectionWeights::identity(int dim) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  return {eye, eye, eye};
}

int TokenGrid::valid_count() const { return static_cast<int>(std::count(mask.begin(), mask.end(), true)); }

void TokenGrid::validate() const {
  const auto n = static_cast<std::size_t>(features.rows());
  if (angles.size() != n || mask.size() != n || static_cast<std::size_t>(pixels.rows()) != n) {
    throw ShapeError("token grid: features, angles, pixels and mask lengths differ");
  }
  if (image_size.x() <= 0 || image_size.y() <= 0) throw ShapeError("token grid: image size must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (!std::isfinite(angles[i].theta) || !std::isfinite(angles[i].phi) || !pixels.row(static_cast<Eigen::Index>(i)).allFinite()) {
      throw ShapeError("token grid: unmasked token " + std::to_string(i) + " has a non-finite position");
    }
  }
}

TokenGrid TokenGrid::from_patches(const PatchGrid& grid, const Eigen::MatrixXd& features,
                                  const Eigen::Vector2i& image_size) {
  if (features.rows() != grid.size()) throw ShapeError("patch features must have one row per patch");
  TokenGrid t;
  t.features = features;
  t.angles = grid.coords;
  t.mask = grid.valid;
  t.image_size = image_size;
  t.camera_id = grid.camera_id;
  t.pixels.resize(grid.size(), 2);
  for (int i = 0; i < grid.size(); ++i) t.pixels.row(i) = grid.centers[static_cast<std::size_t>(i)].transpose();
  return t;
}

TokenGrid TokenGrid::from_bev(const BevGrid& grid, const Eigen::MatrixXd& features, const Eigen::Vector2i& image_size) {
  if (features.rows() != grid.size()) throw ShapeError("BEV features must have one row per cell");
  TokenGrid t;
  t.features = features;
  t.angles = grid.cell_angles;
  t.mask = grid.visible;
  t.image_size = image_size;
  t.camera_id = grid.camera_id;
  t.pixels.resize(grid.size(), 2);
  for (int i = 0; i < grid.size(); ++i) t.pixels.row(i) = grid.cell_pixels[static_cast<std::size_t>(i)].transpose();
  return t;
}

namespace {

void check_weights(const ProjectionWeights& w, Eigen::Index query_in, Eigen::Index key_in,
                   const AttentionConfig& config) {
  const Eigen::Index out = static_cast<Eigen::Index>(config.heads) * config.head_dim;
  auto check = [&](const Eigen::MatrixXd& m, Eigen::Index in, const char* name) {
    if (m.rows() != out || m.cols() != in) {
      throw ShapeError(std::string(name) + " projection is " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " + std::to_string(out) + "x" + std::to_string(in));
    }
  };
  check(w.query, query_in, "query");
  check(w.key, key_in, "key");
  check(w.value, key_in, "value");
}

// Features with the additive encoding applied, when selected.
Eigen::MatrixXd encoded_inputs(const TokenGrid& t, const AttentionConfig& config) {
  if (config.encoding != Encoding::sinusoidal) return t.features;
  Eigen::MatrixXd x = t.features;
  const Eigen::Vector2d size = t.image_size.cast<double>();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!t.mask[static_cast<std::size_t>(i)]) continue;
    const Eigen::Vector2d uv = t.pixels.row(i).transpose().cwiseQuotient(size);
    x.row(i) += sinusoidal_pe<double>(uv, static_cast<int>(x.cols()), config.sinusoidal_base).transpose();
  }
  return x;
}

// Rotates row i of `m` (head_dim wide) by token i's position.
void rotate_rows(Eigen::MatrixXd& m, const TokenGrid& t, const AttentionConfig& config,
                 const RotaryEncoder<double>& encoder) {
  if (!config.rotary_encoding()) return;
  const Eigen::Vector2d size = t.image_size.cast<double>();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!t.mask[static_cast<std::size_t>(i)]) continue;
    Eigen::VectorXd row = m.row(i).transpose();
    if (config.encoding == Encoding::fishrope) {
      const AngularCoord& c = t.angles[static_cast<std::size_t>(i)];
      encoder.rotate_in_place(row, c.theta, c.phi);
    } else {
      const Eigen::Vector2d uv = t.pixels.row(i).transpose().cwiseQuotient(size);
      encoder.rotate_in_place(row, uv.x(), uv.y());
    }
    m.row(i) = row.transpose();
  }
}

// Rotated head projections, one row per token.
Eigen::MatrixXd project_head(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& w, const TokenGrid& t,
                             const AttentionConfig& config, const RotaryEncoder<double>* encoder, int head) {
  Eigen::MatrixXd m = inputs * w.middleRows(static_cast<Eigen::Index>(head) * config.head_dim, config.head_dim).transpose();
  if (encoder) rotate_rows(m, t, config, *encoder);
  return m;
}

std::optional<RotaryEncoder<double>> make_encoder(const AttentionConfig& config) {
  if (!config.rotary_encoding()) return std::nullopt;
  return RotaryEncoder<double>(config.rotary);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

AttentionResult attend(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                       const AttentionConfig& config) {
  const auto encoder = make_encoder(config);
  const RotaryEncoder<double>* enc = encoder ? &*encoder : nullptr;
  const Eigen::MatrixXd xq = encoded_inputs(queries, config);
  const Eigen::MatrixXd xk = encoded_inputs(keys, config);
  const bool any_key = std::find(keys.mask.begin(), keys.mask.end(), true) != keys.mask.end();

  AttentionResult result;
  result.output = Eigen::MatrixXd::Zero(queries.size(), static_cast<Eigen::Index>(config.heads) * config.head_dim);
  result.attended.assign(static_cast<std::size_t>(queries.size()), false);
  for (Eigen::Index i = 0; i < queries.size(); ++i) {
    result.attended[static_cast<std::size_t>(i)] = any_key && queries.mask[static_cast<std::size_t>(i)];
  }
  for (int h = 0; h < config.heads; ++h) {
    const Eigen::MatrixXd q = project_head(xq, weights.query, queries, config, enc, h);
    const Eigen::MatrixXd k = project_head(xk, weights.key, keys, config, enc, h);
    const Eigen::MatrixXd v = project_head(xk, weights.value, keys, config, nullptr, h);
    Eigen::MatrixXd p = masked_softmax(config.scale() * q * k.transpose(), keys.mask);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (!result.attended[static_cast<std::size_t>(i)]) p.row(i).setZero();
    }
    result.output.middleCols(static_cast<Eigen::Index>(h) * config.head_dim, config.head_dim) = p * v;
    result.weights.push_back(std::move(p));
  }
  return result;
}

}  // namespace

Eigen::MatrixXd logit_matrix(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                             const AttentionConfig& config, int head) {
  config.validate();
  queries.validate();
  keys.validate();
  check_weights(weights, queries.features.cols(), keys.features.cols(), config);
  if (head < 0 || head >= config.heads) throw ConfigError("head index out of range");
  const auto encoder = make_encoder(config);
  const RotaryEncoder<double>* enc = encoder ? &*encoder : nullptr;
  const Eigen::MatrixXd q = project_head(encoded_inputs(queries, config), weights.query, queries, config, enc, head);
  const Eigen::MatrixXd k = project_head(encoded_inputs(keys, config), weights.key, keys, config, enc, head);
  return config.scale() * q * k.transpose();
}

Eigen::MatrixXd masked_softmax(const Eigen::MatrixXd& logits, const std::vector<bool>& key_mask) {
  if (static_cast<std::size_t>(logits.cols()) != key_mask.size()) throw ShapeError("softmax mask length mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (key_mask[static_cast<std::size_t>(j)]) top = std::max(top, logits(i, j));
    }
    if (top == -std::numeric_limits<double>::infinity()) continue;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (!key_mask[static_cast<std::size_t>(j)]) continue;
      out(i, j) = std::exp(logits(i, j) - top);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

AttentionResult self_attention(const TokenGrid& tokens, const ProjectionWeights& weights,
                               const AttentionConfig& config) {
  config.validate();
  tokens.validate();
  check_weights(weights, tokens.features.cols(), tokens.features.cols(), config);
  if (tokens.valid_count() == 0) throw EmptyAttentionError();
  return attend(tokens, tokens, weights, config);
}

AttentionResult cross_attention(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                                const AttentionConfig& config) {
  config.validate();
  queries.validate();
  keys.validate();
  check_weights(weights, queries.features.cols(), keys.features.cols(), config);
  if (queries.camera_id != 0 && keys.camera_id != 0 && queries.camera_id != keys.camera_id) {
    throw ConfigError("query and key grids were built from different cameras");
  }
  if (queries.valid_count() == 0) throw EmptyAttentionError();
  return attend(queries, keys, weights, config);
}

Eigen::MatrixXd self_attention_jacobian(const TokenGrid& tokens, const ProjectionWeights& weights,
                                        const AttentionConfig& config) {
  config.validate();
  tokens.validate();
  check_weights(weights, tokens.features.cols(), tokens.features.cols(), config);
  if (tokens.valid_count() == 0) throw EmptyAttentionError();

  const Eigen::Index n = tokens.size();
  const Eigen::Index d_in = tokens.features.cols();
  const Eigen::Index dh = config.head_dim;
  const Eigen::Index d_out = dh * config.heads;
  const double tau = config.scale();
  const auto encoder = make_encoder(config);
  const RotaryEncoder<double>* enc = encoder ? &*encoder : nullptr;
  const Eigen::MatrixXd x = encoded_inputs(tokens, config);

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n * d_out, n * d_in);
  for (int h = 0; h < config.heads; ++h) {
    const Eigen::MatrixXd wq = weights.query.middleRows(h * dh, dh);
    const Eigen::MatrixXd wk = weights.key.middleRows(h * dh, dh);
    const Eigen::MatrixXd wv = weights.value.middleRows(h * dh, dh);

    // d(rotated q_i)/dx_i = R_i Wq; rotation is linear so it acts column-wise.
    std::vector<Eigen::MatrixXd> dq(static_cast<std::size_t>(n)), dk(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      TokenGrid single;
      single.features = Eigen::MatrixXd::Zero(d_in, 1);
      single.angles.assign(static_cast<std::size_t>(d_in), tokens.angles[static_cast<std::size_t>(i)]);
      single.pixels = tokens.pixels.row(i).replicate(d_in, 1);
      single.image_size = tokens.image_size;
      single.mask.assign(static_cast<std::size_t>(d_in), tokens.mask[static_cast<std::size_t>(i)]);
      Eigen::MatrixXd a = wq.transpose();
      Eigen::MatrixXd b = wk.transpose();
      if (enc) {
        rotate_rows(a, single, config, *enc);
        rotate_rows(b, single, config, *enc);
      }
      dq[static_cast<std::size_t>(i)] = a.transpose();
      dk[static_cast<std::size_t>(i)] = b.transpose();
    }

    const Eigen::MatrixXd q = project_head(x, weights.query, tokens, config, enc, h);
    const Eigen::MatrixXd k = project_head(x, weights.key, tokens, config, enc, h);
    const Eigen::MatrixXd v = project_head(x, weights.value, tokens, config, nullptr, h);
    const Eigen::MatrixXd p = masked_softmax(tau * q * k.transpose(), tokens.mask);
    const Eigen::MatrixXd out = p * v;

    for (Eigen::Index i = 0; i < n; ++i) {
      if (!tokens.mask[static_cast<std::size_t>(i)]) continue;
      const Eigen::RowVectorXd k_bar = p.row(i) * k;                  // sum_l P_il k_l
      const Eigen::MatrixXd c = v.transpose() * p.row(i).asDiagonal() * k;  // sum_j P_ij v_j k_j^T
      const Eigen::VectorXd o = out.row(i).transpose();
      for (Eigen::Index m = 0; m < n; ++m) {
        const double pim = p(i, m);
        // d(sum_l P_il S_il)/dx_m
        Eigen::RowVectorXd g = tau * pim * q.row(i) * dk[static_cast<std::size_t>(m)];
        Eigen::MatrixXd block = pim * wv + tau * pim * v.row(m).transpose() * (q.row(i) * dk[static_cast<std::size_t>(m)]);
        if (m == i) {
          g += tau * k_bar * dq[static_cast<std::size_t>(i)];
          block += tau * c * dq[static_cast<std::size_t>(i)];
        }
        block -= o * g;
        jac.block(i * d_out + h * dh, m * d_in, dh, d_in) = block;
      }
    }
  }
  return jac;
}

std::vector<int> best_keys(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                           const AttentionConfig& config, std::uint64_t seed) {
  config.validate();
  queries.validate();
  keys.validate();
  check_weights(weights, queries.features.cols(), keys.features.cols(), config);
  const auto encoder = make_encoder(config);
  const RotaryEncoder<double>* enc = encoder ? &*encoder : nullptr;
  const Eigen::MatrixXd q = project_head(encoded_inputs(queries, config), weights.query, queries, config, enc, 0);
  const Eigen::MatrixXd k = project_head(encoded_inputs(keys, config), weights.key, keys, config, enc, 0);

  std::vector<Eigen::Index> key_index;
  for (Eigen::Index j = 0; j < keys.size(); ++j) {
    if (keys.mask[static_cast<std::size_t>(j)]) key_index.push_back(j);
  }
  Eigen::MatrixXd kv(static_cast<Eigen::Index>(key_index.size()), k.cols());
  for (std::size_t j = 0; j < key_index.size(); ++j) kv.row(static_cast<Eigen::Index>(j)) = k.row(key_index[j]);

  std::vector<int> best(static_cast<std::size_t>(queries.size()), -1);
  if (key_index.empty()) return best;
  constexpr Eigen::Index kChunk = 512;
  std::vector<Eigen::Index> ties;
  for (Eigen::Index start = 0; start < q.rows(); start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, q.rows() - start);
    const Eigen::MatrixXd logits = config.scale() * q.middleRows(start, rows) * kv.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = start + r;
      if (!queries.mask[static_cast<std::size_t>(i)]) continue;
      const double top = logits.row(r).maxCoeff();
      ties.clear();
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        if (logits(r, j) == top) ties.push_back(j);
      }
      Eigen::Index pick = ties.front();
      if (ties.size() > 1) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i))));
        std::uniform_int_distribution<std::size_t> dist(0, ties.size() - 1);
        pick = ties[dist(rng)];
      }
      best[static_cast<std::size_t>(i)] = static_cast<int>(key_index[static_cast<std::size_t>(pick)]);
    }
  }
  return best;
}

}  // namespace fishrope
