// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations. Nothing here calls into the library
// beyond plain data types.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double kb_radius(const std::vector<double>& k, double theta) {
  double r = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) r += k[j] * std::pow(theta, static_cast<double>(2 * j + 1));
  return r;
}

/// theta with kb_radius(theta) = r by bisection on [0, theta_max].
inline double bisect_theta(const std::vector<double>& k, double r, double theta_max) {
  double lo = 0.0, hi = theta_max;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kb_radius(k, mid) < r ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Plane frequencies of one subspace, base^(-2i/n).
inline std::vector<double> freqs(int n, double base) {
  std::vector<double> w;
  for (int i = 0; i < n / 2; ++i) w.push_back(std::exp(-2.0 * i / n * std::log(base)));
  return w;
}

/// Dense block-diagonal rotation: the first `theta_dims` rows rotate by `a`,
/// the rest by `b`, consecutive pairs per plane.
inline Eigen::MatrixXd block_rotation(int dim, int theta_dims, double base, double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  auto fill = [&](int offset, int n, double angle) {
    const std::vector<double> w = freqs(n, base);
    for (int i = 0; i < n / 2; ++i) {
      const int p = offset + 2 * i;
      const double c = std::cos(angle * w[static_cast<std::size_t>(i)]);
      const double s = std::sin(angle * w[static_cast<std::size_t>(i)]);
      m(p, p) = c;
      m(p, p + 1) = -s;
      m(p + 1, p) = s;
      m(p + 1, p + 1) = c;
    }
  };
  fill(0, theta_dims, a);
  fill(theta_dims, dim - theta_dims, b);
  return m;
}

/// Angle between two unit-sphere directions given in (theta, phi), via the
/// Vincenty form of the great-circle formula in polar coordinates.
inline double sphere_angle(double t1, double p1, double t2, double p2) {
  // latitude = pi/2 - theta
  const double l1 = M_PI / 2 - t1, l2 = M_PI / 2 - t2, dl = p2 - p1;
  const double a = std::cos(l2) * std::sin(dl);
  const double b = std::cos(l1) * std::sin(l2) - std::sin(l1) * std::cos(l2) * std::cos(dl);
  const double c = std::sin(l1) * std::sin(l2) + std::cos(l1) * std::cos(l2) * std::cos(dl);
  return std::atan2(std::hypot(a, b), c);
}

/// Central-difference Jacobian of f at x.
inline Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    Eigen::VectorXd xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    j.col(m) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// Reference single-head attention: explicit loops, softmax with max
/// subtraction over unmasked keys.
inline Eigen::MatrixXd attention_output(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                        double scale) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.rows(), v.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    std::vector<double> logits;
    double mx = -INFINITY;
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      logits.push_back(scale * s);
      mx = std::max(mx, logits.back());
    }
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (Eigen::Index j = 0; j < k.rows(); ++j) out.row(i) += logits[static_cast<std::size_t>(j)] / z * v.row(j);
  }
  return out;
}

inline Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

}  // namespace oracle
