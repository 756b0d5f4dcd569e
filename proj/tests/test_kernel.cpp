#include <doctest.h>

#include <Eigen/Core>
#include <cmath>

#include "hmoh/kernel.hpp"
#include "hmoh/rng.hpp"

using hmoh::AnchorSet;
using hmoh::collect_anchors;
using hmoh::kernel_map;
using hmoh::kernel_map_batch;

TEST_CASE("anchors are the first m points in arrival order") {
  Eigen::MatrixXd stream(2, 5);
  stream << 1, 2, 3, 4, 5, 10, 20, 30, 40, 50;
  const AnchorSet a = collect_anchors(stream, 3, 1.0);
  CHECK(a.count() == 3);
  CHECK(a.anchors == stream.leftCols(3));
}

TEST_CASE("insufficient stream for anchors") {
  Eigen::MatrixXd stream = Eigen::MatrixXd::Zero(4, 200);
  CHECK_THROWS_AS(collect_anchors(stream, 300, 1.0), hmoh::Error);
}

TEST_CASE("kernel value is 1 at an anchor and exp(-1) at distance sqrt(2) eta") {
  const double eta = 1.7;
  Eigen::MatrixXd anchors(1, 2);
  anchors << 0.0, 3.0;
  const AnchorSet a{anchors, eta};

  Eigen::VectorXd x(1);
  x << 0.0;
  Eigen::VectorXd z = kernel_map(x, a);
  CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));

  x << std::sqrt(2.0) * eta;  // squared distance = 2 eta^2
  z = kernel_map(x, a);
  CHECK(z[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("dimension mismatch is rejected") {
  const AnchorSet a{Eigen::MatrixXd::Zero(3, 2), 1.0};
  CHECK_THROWS_AS(kernel_map(Eigen::VectorXd::Zero(4), a), hmoh::Error);
  CHECK_THROWS_AS(kernel_map_batch(Eigen::MatrixXd::Zero(4, 7), a), hmoh::Error);
}

TEST_CASE("outputs lie in (0,1] and kernel is symmetric") {
  hmoh::Rng rng(42);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd p(5), q(5);
    for (int i = 0; i < 5; ++i) {
      p[i] = rng.gaussian();
      q[i] = rng.gaussian();
    }
    const AnchorSet ap{p, 2.0}, aq{q, 2.0};
    const double kpq = kernel_map(q, ap)[0];
    const double kqp = kernel_map(p, aq)[0];
    CHECK(kpq > 0.0);
    CHECK(kpq <= 1.0);
    CHECK(kpq == doctest::Approx(kqp).epsilon(1e-14));
  }
}

TEST_CASE("component strictly decreases as the point moves away") {
  Eigen::MatrixXd anchor = Eigen::MatrixXd::Zero(3, 1);
  const AnchorSet a{anchor, 1.5};
  double prev = 2.0;
  for (double step = 0.0; step < 5.0; step += 0.25) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(3, step);
    const double v = kernel_map(x, a)[0];
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("batch path agrees with the per-point path") {
  hmoh::Rng rng(7);
  Eigen::MatrixXd anchors(6, 4), points(6, 9);
  for (int i = 0; i < anchors.size(); ++i) anchors(i) = rng.gaussian();
  for (int i = 0; i < points.size(); ++i) points(i) = rng.gaussian();
  const AnchorSet a{anchors, 1.3};
  const Eigen::MatrixXd batch = kernel_map_batch(points, a);
  for (int j = 0; j < points.cols(); ++j) {
    const Eigen::VectorXd single = kernel_map(points.col(j), a);
    CHECK((batch.col(j) - single).cwiseAbs().maxCoeff() < 1e-12);
  }
}
