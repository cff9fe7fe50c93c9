// SPDX-License-Identifier: Apache-2.0
//
// Reference dense attention with pluggable position encoding. Queries and keys
// are projected per head, rotated by their token positions, and compared with
// a scaled dot product; masked keys are excluded from the softmax.
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fishrope/angular.hpp"
#include "fishrope/angular_coord.hpp"
#include "fishrope/rope.hpp"

namespace fishrope {

enum class Encoding { none, sinusoidal, axial_rope, fishrope };

std::string_view to_string(Encoding encoding);
/// Throws ConfigError for unknown names.
Encoding parse_encoding(std::string_view name);

struct AttentionConfig {
  int heads = 1;
  int head_dim = 0;
  Encoding encoding = Encoding::none;
  RotaryConfig<double> rotary;
  /// Logit scale; 1/sqrt(head_dim) when unset.
  std::optional<double> temperature;
  double sinusoidal_base = 10000.0;

  /// Single-head config with an equal theta/phi split.
  static AttentionConfig make(Encoding encoding, int head_dim, double base = 10000.0);

  double scale() const;
  bool rotary_encoding() const { return encoding == Encoding::axial_rope || encoding == Encoding::fishrope; }
  void validate() const;
};

/// Projection matrices, each (heads * head_dim) x input_dim.
struct ProjectionWeights {
  Eigen::MatrixXd query;
  Eigen::MatrixXd key;
  Eigen::MatrixXd value;

  static ProjectionWeights identity(int dim);
};

/// Feature vectors bound to positions. `angles` drive the angular encoding,
/// `pixels` (raw, normalized by `image_size`) drive the Cartesian ones.
struct TokenGrid {
  Eigen::MatrixXd features;  // one row per token
  std::vector<AngularCoord> angles;
  Eigen::Matrix<double, Eigen::Dynamic, 2> pixels;
  Eigen::Vector2i image_size = Eigen::Vector2i::Ones();
  std::vector<bool> mask;
  /// Camera fingerprint; 0 means unbound.
  std::uint64_t camera_id = 0;

  Eigen::Index size() const { return features.rows(); }
  int valid_count() const;
  void validate() const;

  /// Tokens at patch centers; invalid patches are masked out.
  static TokenGrid from_patches(const PatchGrid& grid, const Eigen::MatrixXd& features,
                                const Eigen::Vector2i& image_size);
  /// Tokens at BEV cells; invisible cells are masked out. Pixels are the KB
  /// projections of the cells.
  static TokenGrid from_bev(const BevGrid& grid, const Eigen::MatrixXd& features, const Eigen::Vector2i& image_size);
};

struct AttentionResult {
  /// One row per query, heads * head_dim columns; zero where not attended.
  Eigen::MatrixXd output;
  /// False for masked queries and for queries with no unmasked key.
  std::vector<bool> attended;
  /// Softmax weights per head, queries x keys.
  std::vector<Eigen::MatrixXd> weights;
};

/// Pre-softmax logits temperature * <enc(Wq x_i), enc(Wk y_j)> for one head,
/// over every query/key pair regardless of masks.
Eigen::MatrixXd logit_matrix(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                             const AttentionConfig& config, int head = 0);

/// Softmax over the unmasked entries of each row; masked entries get weight 0.
/// Rows with no unmasked entry are all zero.
Eigen::MatrixXd masked_softmax(const Eigen::MatrixXd& logits, const std::vector<bool>& key_mask);

/// Throws EmptyAttentionError when every token is masked.
AttentionResult self_attention(const TokenGrid& tokens, const ProjectionWeights& weights,
                               const AttentionConfig& config);

/// Analytic d(output)/d(features). Row i * D_out + c, column m * D_in + b.
Eigen::MatrixXd self_attention_jacobian(const TokenGrid& tokens, const ProjectionWeights& weights,
                                        const AttentionConfig& config);

/// Throws ConfigError when both grids carry different camera fingerprints and
/// EmptyAttentionError when no query is unmasked.
AttentionResult cross_attention(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                                const AttentionConfig& config);

/// Index of the max-logit unmasked key for each query (head 0), or -1 for
/// masked queries. Exact ties are broken uniformly at random with a stream
/// derived from `seed` and the query index.
std::vector<int> best_keys(const TokenGrid& queries, const TokenGrid& keys, const ProjectionWeights& weights,
                           const AttentionConfig& config, std::uint64_t seed = 0);

}  // namespace fishrope
