// SPDX-License-Identifier: Apache-2.0
//
// Rotary position machinery: frequency schedules, block-diagonal pair
// rotations, the angular (theta, phi) rotary embedding, and the Cartesian
// baselines it is compared against.
//
// Layout: rotation plane i acts on the consecutive pair (x[2i], x[2i+1]) of
// its subspace. The theta subspace is x[0 : theta_dims], the phi subspace is
// x[theta_dims : dim]; each gets its own schedule
//
//   w_i = base^(-2 i / subspace_dims),   i = 0 .. subspace_dims/2 - 1
//
// so both start at w_0 = 1 under any split.
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "fishrope/angular_coord.hpp"
#include "fishrope/errors.hpp"

namespace fishrope {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct RotaryConfig {
  int dim = 0;
  int theta_dims = 0;
  Scalar base = Scalar(10000);
  /// Multiplies every rotary input angle or coordinate.
  Scalar angle_scale = Scalar(1);
  /// Wrap delta-phi into [-pi, pi) in relative_logit. The absolute form cannot
  /// wrap, so with this set the two forms agree only for |delta-phi| < pi.
  bool wrap_phi = false;

  static RotaryConfig equal_split(int dim, Scalar base = Scalar(10000)) {
    RotaryConfig c;
    c.dim = dim;
    c.theta_dims = dim / 2;
    c.base = base;
    return c;
  }

  int phi_dims() const { return dim - theta_dims; }

  void validate() const {
    if (dim <= 0 || dim % 2 != 0) throw ConfigError("rotary dim must be positive and even, got " + std::to_string(dim));
    if (theta_dims < 0 || theta_dims > dim || theta_dims % 2 != 0) {
      throw ConfigError("theta_dims must be even and within [0, dim], got " + std::to_string(theta_dims));
    }
    if (!(base > Scalar(1))) throw ConfigError("frequency base must exceed 1");
    if (!std::isfinite(static_cast<double>(angle_scale))) throw ConfigError("angle scale must be finite");
  }
};

/// Per-plane angular frequencies of one rotary subspace.
template <typename Scalar = double>
class FrequencySchedule {
 public:
  explicit FrequencySchedule(Vector<Scalar> freqs) : freqs_(std::move(freqs)) {
    if (freqs_.size() == 0) throw ConfigError("frequency schedule is empty");
    if (freqs_(0) != Scalar(1)) throw ConfigError("frequency schedule must start at 1");
    for (Eigen::Index i = 1; i < freqs_.size(); ++i) {
      if (!(freqs_(i) > Scalar(0) && freqs_(i) < freqs_(i - 1))) {
        throw ConfigError("frequency schedule must be positive and strictly decreasing");
      }
    }
  }

  const Vector<Scalar>& freqs() const { return freqs_; }
  Eigen::Index planes() const { return freqs_.size(); }
  Eigen::Index dims() const { return 2 * freqs_.size(); }

 private:
  Vector<Scalar> freqs_;
};

template <typename Scalar>
FrequencySchedule<Scalar> make_schedule(int subspace_dims, Scalar base) {
  if (subspace_dims < 2 || subspace_dims % 2 != 0) {
    throw ConfigError("subspace dims must be even and at least 2, got " + std::to_string(subspace_dims));
  }
  if (!(base > Scalar(1))) throw ConfigError("frequency base must exceed 1");
  Vector<Scalar> freqs(subspace_dims / 2);
  for (int i = 0; i < subspace_dims / 2; ++i) {
    freqs(i) = std::pow(base, Scalar(-2 * i) / Scalar(subspace_dims));
  }
  return FrequencySchedule<Scalar>(std::move(freqs));
}

namespace detail {

// Rotates consecutive pairs of `x` in place by angle * freqs(i).
template <typename Derived>
void rotate_segment(Eigen::MatrixBase<Derived>& x, typename Derived::Scalar angle,
                    const Vector<typename Derived::Scalar>& freqs) {
  using std::cos;
  using std::sin;
  for (Eigen::Index i = 0; i < freqs.size(); ++i) {
    const auto a = angle * freqs(i);
    const auto c = cos(a);
    const auto s = sin(a);
    const auto x0 = x(2 * i);
    const auto x1 = x(2 * i + 1);
    x(2 * i) = x0 * c - x1 * s;
    x(2 * i + 1) = x0 * s + x1 * c;
  }
}

}  // namespace detail

/// R(angle * w) x for a vector spanning exactly the schedule's planes.
template <typename Derived>
Vector<typename Derived::Scalar> rotate_pairs(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar angle,
                                              const FrequencySchedule<typename Derived::Scalar>& schedule) {
  if (x.size() != schedule.dims()) {
    throw ShapeError("rotate_pairs: vector has " + std::to_string(x.size()) + " entries, schedule spans " +
                     std::to_string(schedule.dims()));
  }
  Vector<typename Derived::Scalar> out = x;
  detail::rotate_segment(out, angle, schedule.freqs());
  return out;
}

/// Schedules for both subspaces of a RotaryConfig, built once.
template <typename Scalar = double>
class RotaryEncoder {
 public:
  explicit RotaryEncoder(const RotaryConfig<Scalar>& config) : config_(config) {
    config_.validate();
    if (config_.theta_dims > 0) theta_freqs_ = make_schedule(config_.theta_dims, config_.base).freqs();
    if (config_.phi_dims() > 0) phi_freqs_ = make_schedule(config_.phi_dims(), config_.base).freqs();
  }

  const RotaryConfig<Scalar>& config() const { return config_; }
  const Vector<Scalar>& theta_freqs() const { return theta_freqs_; }
  const Vector<Scalar>& phi_freqs() const { return phi_freqs_; }

  /// Rotates the first subspace by `first` and the second by `second`, in place.
  template <typename Derived>
  void rotate_in_place(Eigen::MatrixBase<Derived>& x, Scalar first, Scalar second) const {
    check_size(x.size());
    auto head = x.head(config_.theta_dims);
    auto tail = x.tail(config_.phi_dims());
    detail::rotate_segment(head, config_.angle_scale * first, theta_freqs_);
    detail::rotate_segment(tail, config_.angle_scale * second, phi_freqs_);
  }

  template <typename Derived>
  Vector<Scalar> fishrope(const Eigen::MatrixBase<Derived>& x, const AngularCoord& coord) const {
    Vector<Scalar> out = x;
    rotate_in_place(out, Scalar(coord.theta), Scalar(coord.phi));
    return out;
  }

  /// Axial baseline; `uv` must already be normalized to [0, 1].
  template <typename Derived>
  Vector<Scalar> axial(const Eigen::MatrixBase<Derived>& x, const Eigen::Vector2d& uv) const {
    Vector<Scalar> out = x;
    rotate_in_place(out, Scalar(uv.x()), Scalar(uv.y()));
    return out;
  }

  /// <q_theta, R(dtheta w) k_theta> + <q_phi, R(dphi w) k_phi>.
  template <typename DerivedQ, typename DerivedK>
  Scalar relative_logit(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedK>& k,
                        const AngularCoord& delta) const {
    check_size(q.size());
    check_size(k.size());
    const double dphi = config_.wrap_phi ? wrap_azimuth(delta.phi) : delta.phi;
    Vector<Scalar> rotated = k;
    rotate_in_place(rotated, Scalar(delta.theta), Scalar(dphi));
    return q.dot(rotated);
  }

 private:
  void check_size(Eigen::Index n) const {
    if (n != config_.dim) {
      throw ShapeError("rotary input has " + std::to_string(n) + " entries, config dim is " +
                       std::to_string(config_.dim));
    }
  }

  RotaryConfig<Scalar> config_;
  Vector<Scalar> theta_freqs_;
  Vector<Scalar> phi_freqs_;
};

/// Angular rotary embedding: theta rotates the first subspace, phi the second.
template <typename Derived>
Vector<typename Derived::Scalar> apply_fishrope(const Eigen::MatrixBase<Derived>& x, const AngularCoord& coord,
                                                const RotaryConfig<typename Derived::Scalar>& config) {
  return RotaryEncoder<typename Derived::Scalar>(config).fishrope(x, coord);
}

/// Cartesian axial baseline: the same rotation driven by (u / width, v / height).
template <typename Derived>
Vector<typename Derived::Scalar> apply_axial_rope(const Eigen::MatrixBase<Derived>& x, const Eigen::Vector2d& pixel,
                                                  const RotaryConfig<typename Derived::Scalar>& config,
                                                  const Eigen::Vector2i& image_size) {
  const Eigen::Vector2d uv = pixel.cwiseQuotient(image_size.cast<double>());
  return RotaryEncoder<typename Derived::Scalar>(config).axial(x, uv);
}

template <typename DerivedQ, typename DerivedK>
typename DerivedQ::Scalar relative_logit(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedK>& k,
                                         const AngularCoord& delta,
                                         const RotaryConfig<typename DerivedQ::Scalar>& config) {
  return RotaryEncoder<typename DerivedQ::Scalar>(config).relative_logit(q, k, delta);
}

/// Additive 2D sinusoidal encoding. The first dim/2 entries encode
/// position.x(), the rest position.y(); within each half, pair i holds
/// (sin(p w_i), cos(p w_i)) with w_i = base^(-2i / (dim/2)).
template <typename Scalar = double>
Vector<Scalar> sinusoidal_pe(const Eigen::Vector2d& position, int dim, Scalar base = Scalar(10000)) {
  if (dim <= 0 || dim % 4 != 0) throw ConfigError("sinusoidal dim must be a positive multiple of 4, got " + std::to_string(dim));
  if (!(base > Scalar(1))) throw ConfigError("frequency base must exceed 1");
  const int half = dim / 2;
  Vector<Scalar> out(dim);
  for (int axis = 0; axis < 2; ++axis) {
    const Scalar p = Scalar(position(axis));
    for (int i = 0; i < half / 2; ++i) {
      const Scalar w = std::pow(base, Scalar(-2 * i) / Scalar(half));
      out(axis * half + 2 * i) = std::sin(p * w);
      out(axis * half + 2 * i + 1) = std::cos(p * w);
    }
  }
  return out;
}

}  // namespace fishrope
