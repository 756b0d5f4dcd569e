#include <doctest.h>

#include <Eigen/Core>
#include <sstream>
#include <vector>

#include "hmoh/rng.hpp"
#include "hmoh/trainer.hpp"

using hmoh::CodeVector;
using hmoh::HashModel;
using hmoh::MaskMode;
using hmoh::mistake_mask;
using hmoh::ModelHyper;
using hmoh::TrainedModel;
using hmoh::TrainOptions;
using hmoh::train_stream;

namespace {

HashModel make_model(int dim, int bits, MaskMode mode = MaskMode::mistake) {
  ModelHyper h;
  h.bits = bits;
  h.raw_dim = dim;
  h.model_dim = dim;
  h.order = hmoh::target_order(bits, 2);
  h.mask_mode = mode;
  return HashModel(h, hmoh::build_sylvester(h.order, 1), hmoh::make_projector(h.order, bits, 2),
                   std::nullopt);
}

Eigen::MatrixXi random_targets(int bits, int n, hmoh::Rng& rng) {
  Eigen::MatrixXi t(bits, n);
  for (int i = 0; i < t.size(); ++i) t(i) = (rng.next_u64() & 1) ? 1 : -1;
  return t;
}

}  // namespace

TEST_CASE("predict_scores on zero and identity-like weights") {
  auto model = make_model(4, 4);
  CHECK(model.predict_scores(Eigen::VectorXd::Ones(4)).isZero(0.0));
  CHECK_THROWS_AS(model.predict_scores(Eigen::VectorXd::Ones(5)), hmoh::Error);
}

TEST_CASE("predict_scores matches a double-loop oracle after updates") {
  hmoh::Rng rng(4);
  auto model = make_model(7, 5);
  for (int step = 0; step < 5; ++step) {
    Eigen::MatrixXd z(7, 1);
    for (int i = 0; i < 7; ++i) z(i, 0) = rng.gaussian();
    model.sgd_step(z, random_targets(5, 1, rng), 0.3);
  }
  Eigen::VectorXd x(7);
  for (int i = 0; i < 7; ++i) x[i] = rng.gaussian();
  const Eigen::VectorXd scores = model.predict_scores(x);
  for (int k = 0; k < 5; ++k) {
    double naive = 0;
    for (int a = 0; a < 7; ++a) naive += model.weights()(a, k) * x[a];
    CHECK(scores[k] == doctest::Approx(naive).epsilon(1e-12));
  }
}

TEST_CASE("mistake_mask semantics") {
  CodeVector target(3);
  target << 1, 1, -1;

  Eigen::VectorXd agree(3);
  agree << 0.5, 2.0, -0.1;
  CHECK(mistake_mask(agree, target).isZero(0.0));

  Eigen::VectorXd s2(3);
  s2 << -1.0, 2.0, -3.0;
  CodeVector t3(3);
  t3 << 1, -1, 1;
  CHECK(mistake_mask(s2, t3) == Eigen::VectorXd::Ones(3));

  Eigen::VectorXd s3(3);
  s3 << 0.5, -0.2, 0.0;
  CodeVector t4(3);
  t4 << 1, 1, -1;
  Eigen::VectorXd expected(3);
  expected << 0, 1, 1;  // sign(0) = +1 mismatches the -1 target
  CHECK(mistake_mask(s3, t4) == expected);

  // correct mode is the complement
  CHECK(mistake_mask(s3, t4, MaskMode::correct) == (Eigen::VectorXd::Ones(3) - expected));

  CHECK_THROWS_AS(mistake_mask(Eigen::VectorXd::Zero(2), target), hmoh::Error);
}

TEST_CASE("zero mask leaves W unchanged but still advances the ensemble") {
  hmoh::Rng rng(5);
  auto model = make_model(6, 4);
  Eigen::MatrixXd z(6, 1);
  for (int i = 0; i < 6; ++i) z(i, 0) = rng.gaussian();
  auto targets = random_targets(4, 1, rng);
  model.sgd_step(z, targets, 0.2);
  const Eigen::MatrixXd w1 = model.weights();

  // replaying until no mistakes, then one more step: W frozen, rounds advance
  for (int i = 0; i < 50; ++i) model.sgd_step(z, targets, 0.2);
  const Eigen::MatrixXd w_stable = model.weights();
  const long rounds_before = model.rounds();
  const Eigen::MatrixXd sum_before = model.weight_sum();
  model.sgd_step(z, targets, 0.2);
  CHECK(model.weights() == w_stable);
  CHECK(model.rounds() == rounds_before + 1);
  CHECK((model.weight_sum() - (sum_before + w_stable)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single mistaken bit is a rank-one column update") {
  auto model = make_model(5, 3);
  Eigen::MatrixXd z(5, 1);
  z << 1, 2, 3, 4, 5;
  // zero scores predict +1 everywhere; only bit 1 has target -1
  Eigen::MatrixXi targets(3, 1);
  targets << 1, -1, 1;
  model.sgd_step(z, targets, 0.25);
  CHECK(model.weights().col(0).isZero(0.0));
  CHECK(model.weights().col(2).isZero(0.0));
  CHECK((model.weights().col(1) + 0.25 * z.col(0)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("update equals the dense oracle and the frozen-mask finite difference") {
  hmoh::Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 3 + static_cast<int>(rng.uniform_index(6));
    const int r = 2 + static_cast<int>(rng.uniform_index(6));
    const int n = 1 + static_cast<int>(rng.uniform_index(3));
    auto model = make_model(d, r);
    // a couple of warm-up steps so W is nonzero
    for (int s = 0; s < 2; ++s) {
      Eigen::MatrixXd z0(d, 1);
      for (int i = 0; i < d; ++i) z0(i, 0) = rng.gaussian();
      model.sgd_step(z0, random_targets(r, 1, rng), 0.1);
    }
    Eigen::MatrixXd z(d, n);
    for (int i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
    const auto targets = random_targets(r, n, rng);
    const Eigen::MatrixXd w0 = model.weights();
    const double lr = 0.07;

    // frozen mask from the pre-update weights
    Eigen::MatrixXd masked(r, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < r; ++k) {
        double score = 0;
        for (int a = 0; a < d; ++a) score += w0(a, k) * z(a, i);
        masked(k, i) = ((score >= 0 ? 1 : -1) != targets(k, i)) ? targets(k, i) : 0.0;
      }

    model.sgd_step(z, targets, lr);

    // dense oracle: W + lr * Z (targets .* mask)^T
    const Eigen::MatrixXd expected = w0 + lr * z * masked.transpose();
    CHECK((model.weights() - expected).cwiseAbs().maxCoeff() < 1e-12);

    // central finite differences of the batch objective with the mask frozen:
    // Phi(W) = -sum_{k,i} masked(k,i) * (W^T z_i)_k; update = W - lr * dPhi/dW
    const double eps = 1e-5;
    auto phi = [&](const Eigen::MatrixXd& w) {
      double total = 0;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < r; ++k) {
          double score = 0;
          for (int a = 0; a < d; ++a) score += w(a, k) * z(a, i);
          total -= masked(k, i) * score;
        }
      return total;
    };
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < r; ++k) {
        Eigen::MatrixXd wp = w0, wm = w0;
        wp(a, k) += eps;
        wm(a, k) -= eps;
        const double grad = (phi(wp) - phi(wm)) / (2 * eps);
        CHECK(model.weights()(a, k) == doctest::Approx(w0(a, k) - lr * grad).epsilon(1e-6));
      }
  }
}

TEST_CASE("zero learning rate leaves W identically zero") {
  hmoh::Rng rng(8);
  auto model = make_model(6, 4);
  for (int s = 0; s < 20; ++s) {
    Eigen::MatrixXd z(6, 2);
    for (int i = 0; i < z.size(); ++i) z(i) = rng.gaussian();
    model.sgd_step(z, random_targets(4, 2, rng), 0.0);
  }
  CHECK(model.weights().isZero(0.0));
  CHECK(model.final_weights().isZero(0.0));
}

TEST_CASE("replay after an update never increases the batch mistake count") {
  hmoh::Rng rng(10);
  for (double lr : {0.01, 0.1}) {
    for (int trial = 0; trial < 20; ++trial) {
      auto model = make_model(8, 6);
      Eigen::MatrixXd z(8, 1);
      for (int i = 0; i < 8; ++i) z(i, 0) = rng.gaussian();
      const auto targets = random_targets(6, 1, rng);
      auto count_mistakes = [&] {
        const Eigen::VectorXd mask =
            mistake_mask(model.predict_scores(z.col(0)), targets.col(0));
        return static_cast<int>(mask.sum());
      };
      const int before = count_mistakes();
      model.sgd_step(z, targets, lr);
      CHECK(count_mistakes() <= before);
    }
  }
}

TEST_CASE("ensemble weighting") {
  auto model = make_model(4, 3);
  CHECK_THROWS_AS(model.final_weights(), hmoh::Error);  // T = 0

  hmoh::Rng rng(11);
  Eigen::MatrixXd z(4, 1);
  for (int i = 0; i < 4; ++i) z(i, 0) = rng.gaussian();
  const auto targets = random_targets(3, 1, rng);
  model.sgd_step(z, targets, 0.5);
  CHECK(model.final_weights() == model.weights());  // T = 1 -> W^1

  // once stable, snapshots repeat: mean of identical matrices is the matrix
  for (int i = 0; i < 30; ++i) model.sgd_step(z, targets, 0.5);
  auto stable = make_model(4, 3);
  (void)stable;
  const Eigen::MatrixXd w = model.weights();
  const long t0 = model.rounds();
  const Eigen::MatrixXd sum0 = model.weight_sum();
  for (int i = 0; i < 4; ++i) model.sgd_step(z, targets, 0.5);
  CHECK((model.weight_sum() - (sum0 + 4 * w)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(model.rounds() == t0 + 4);
}

TEST_CASE("weight_sum equals the sum of per-round snapshots") {
  hmoh::Rng rng(13);
  auto model = make_model(5, 4);
  Eigen::MatrixXd recorded = Eigen::MatrixXd::Zero(5, 4);
  for (int s = 0; s < 25; ++s) {
    Eigen::MatrixXd z(5, 1);
    for (int i = 0; i < 5; ++i) z(i, 0) = rng.gaussian();
    model.sgd_step(z, random_targets(4, 1, rng), 0.2);
    recorded += model.weights();
  }
  CHECK((model.weight_sum() - recorded).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((model.final_weights() - recorded / 25.0).cwiseAbs().maxCoeff() < 1e-15);
}

namespace {
struct TinyStream {
  Eigen::MatrixXd features;
  std::vector<std::vector<std::uint32_t>> labels;
};

TinyStream tiny_two_class(int n, std::uint64_t seed) {
  hmoh::Rng rng(seed);
  TinyStream s;
  s.features.resize(4, n);
  s.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint32_t cls = i % 2;
    for (int k = 0; k < 4; ++k)
      s.features(k, i) = rng.gaussian() * 0.3 + (cls ? 2.0 : -2.0) * (k < 2 ? 1 : -1);
    s.labels[static_cast<std::size_t>(i)] = {cls};
  }
  return s;
}
}  // namespace

TEST_CASE("single-batch training matches the hand trace") {
  // one batch, zero-init W: sign(0)=+1, so A has ones exactly where the
  // target bit is -1, and W_final = W^1 = lr * Z (target .* A)^T
  TinyStream s = tiny_two_class(3, 20);
  TrainOptions opt;
  opt.bits = 8;
  opt.max_labels = 2;
  opt.batch_size = 3;
  opt.learning_rate = 0.4;
  opt.codebook_seed = 5;
  opt.projector_seed = 6;
  const auto result = train_stream(opt, s.features, s.labels);
  CHECK(result.rounds == 1);

  auto cb = hmoh::build_sylvester(8, 5);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 8);
  for (int i = 0; i < 3; ++i) {
    const CodeVector target = cb.assign_column(s.labels[static_cast<std::size_t>(i)][0]);
    for (int k = 0; k < 8; ++k)
      if (target[k] == -1) expected.col(k) += 0.4 * s.features.col(i) * -1.0;
  }
  CHECK((result.model.weights() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identical seeds and stream give bit-identical weights") {
  TinyStream s = tiny_two_class(60, 21);
  TrainOptions opt;
  opt.bits = 16;
  opt.max_labels = 2;
  const auto a = train_stream(opt, s.features, s.labels);
  const auto b = train_stream(opt, s.features, s.labels);
  CHECK(a.model.weights() == b.model.weights());
  CHECK(a.last_round_weights == b.last_round_weights);
}

TEST_CASE("kernelized training consumes anchors before learning") {
  TinyStream s = tiny_two_class(40, 22);
  TrainOptions opt;
  opt.bits = 8;
  opt.max_labels = 2;
  opt.kernel = true;
  opt.anchor_count = 10;
  opt.bandwidth = 2.0;
  const auto result = train_stream(opt, s.features, s.labels);
  CHECK(result.rounds == 30);  // 40 points minus 10 anchors, n_t = 1
  CHECK(result.model.weights().rows() == 10);

  TrainOptions starved = opt;
  starved.anchor_count = 50;
  CHECK_THROWS_AS(train_stream(starved, s.features, s.labels), hmoh::Error);
}

TEST_CASE("empty stream and count mismatch are rejected") {
  TrainOptions opt;
  CHECK_THROWS_AS(train_stream(opt, Eigen::MatrixXd(4, 0), {}), hmoh::Error);
  CHECK_THROWS_AS(train_stream(opt, Eigen::MatrixXd::Zero(4, 2), {{0u}}), hmoh::Error);
}

TEST_CASE("separable single-class stream stops making mistakes on repeats") {
  // all points of one class: after enough passes over the same point the
  // mask goes quiet
  TrainOptions opt;
  opt.bits = 8;
  opt.max_labels = 2;
  opt.learning_rate = 0.1;
  Eigen::MatrixXd stream(3, 50);
  std::vector<std::vector<std::uint32_t>> labels(50, {0u});
  for (int i = 0; i < 50; ++i) stream.col(i) << 1.0, 0.5, -0.25;
  const auto result = train_stream(opt, stream, labels);
  // every repeat after the first correction is mistake-free
  CHECK(result.mistakes <= 8);
}

TEST_CASE("model file round-trips bit-exactly") {
  TinyStream s = tiny_two_class(50, 23);
  TrainOptions opt;
  opt.bits = 12;
  opt.max_labels = 2;
  opt.kernel = true;
  opt.anchor_count = 8;
  opt.bandwidth = 1.5;
  const auto result = train_stream(opt, s.features, s.labels);

  std::stringstream ss;
  result.model.save(ss);
  const std::string payload = ss.str();
  const TrainedModel loaded = TrainedModel::load(ss);
  CHECK(loaded.weights() == result.model.weights());
  CHECK(loaded.hyper().bits == 12);
  CHECK(loaded.hyper().kernel);
  CHECK(loaded.codebook().assignment() == result.model.codebook().assignment());
  CHECK(loaded.projector().seed() == result.model.projector().seed());

  // saving the loaded model reproduces the byte stream
  std::stringstream ss2;
  loaded.save(ss2);
  CHECK(ss2.str() == payload);

  // encode parity between original and reloaded
  const auto c1 = result.model.encode(s.features.leftCols(5));
  const auto c2 = loaded.encode(s.features.leftCols(5));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(hmoh::BinaryCodeMatrix::hamming_between(c1, i, c2, i) == 0);
}

TEST_CASE("encode matches the dense sign oracle") {
  TinyStream s = tiny_two_class(30, 24);
  TrainOptions opt;
  opt.bits = 10;
  opt.max_labels = 2;
  const auto result = train_stream(opt, s.features, s.labels);
  const auto codes = result.model.encode(s.features);
  const Eigen::MatrixXd scores = result.model.weights().transpose() * s.features;
  for (std::size_t i = 0; i < 30; ++i)
    for (int b = 0; b < 10; ++b)
      CHECK(codes.get(i, b) == (scores(b, static_cast<Eigen::Index>(i)) >= 0 ? 1 : -1));
  CHECK_THROWS_AS(result.model.encode(Eigen::MatrixXd::Zero(7, 3)), hmoh::Error);
}
