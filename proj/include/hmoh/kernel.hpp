#pragma once

#include <Eigen/Core>
#include <string>

#include "hmoh/errors.hpp"

namespace hmoh {

/// RBF anchor set: the first m streaming points, frozen.
/// kernel value k(x, a_i) = exp(-||x - a_i||^2 / (2 * bandwidth^2)).
struct AnchorSet {
  Eigen::MatrixXd anchors;  // d x m, one anchor per column
  double bandwidth = 1.0;

  int count() const { return static_cast<int>(anchors.cols()); }
  int dim() const { return static_cast<int>(anchors.rows()); }
};

/// Take the first `m` columns of `points` (arrival order) as anchors.
inline AnchorSet collect_anchors(const Eigen::MatrixXd& points, int m, double bandwidth) {
  if (m < 1) fail(Errc::bad_config, "anchor count must be >= 1");
  if (bandwidth <= 0) fail(Errc::bad_config, "bandwidth must be positive");
  if (points.cols() < m)
    fail(Errc::insufficient_data, "stream ended after " + std::to_string(points.cols()) +
                                      " points, need " + std::to_string(m) + " anchors");
  return AnchorSet{points.leftCols(m), bandwidth};
}

inline Eigen::VectorXd kernel_map(const Eigen::VectorXd& x, const AnchorSet& anchors) {
  if (x.size() != anchors.dim())
    fail(Errc::dimension_mismatch, "kernel_map: point dim " + std::to_string(x.size()) +
                                       " != anchor dim " + std::to_string(anchors.dim()));
  const double inv_two_bw2 = 1.0 / (2.0 * anchors.bandwidth * anchors.bandwidth);
  return ((anchors.anchors.colwise() - x).colwise().squaredNorm() * -inv_two_bw2)
      .array()
      .exp()
      .transpose();
}

/// Column-wise kernel_map as one pass: ||x-a||^2 = ||x||^2 + ||a||^2 - 2 x.a.
inline Eigen::MatrixXd kernel_map_batch(const Eigen::MatrixXd& points, const AnchorSet& anchors) {
  if (points.rows() != anchors.dim())
    fail(Errc::dimension_mismatch, "kernel_map_batch: point dim mismatch");
  const double inv_two_bw2 = 1.0 / (2.0 * anchors.bandwidth * anchors.bandwidth);
  Eigen::VectorXd a2 = anchors.anchors.colwise().squaredNorm();
  Eigen::VectorXd x2 = points.colwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (anchors.anchors.transpose() * points);  // m x n
  d2.colwise() += a2;
  d2.rowwise() += x2.transpose();
  // rounding can push ||x-a||^2 slightly negative for near-identical vectors
  return (d2.cwiseMax(0.0) * -inv_two_bw2).array().exp();
}

}  // namespace hmoh
