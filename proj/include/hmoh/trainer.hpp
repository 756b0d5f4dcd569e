#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hmoh/codec.hpp"
#include "hmoh/errors.hpp"
#include "hmoh/hadamard.hpp"
#include "hmoh/kernel.hpp"
#include "hmoh/lsh.hpp"

namespace hmoh {

// The literal reading of the perceptron mask (update on *correctly* classified
// bits) is a non-learning fixed point from zero init; `mistake` is the default
// and `correct` is kept for comparison.
enum class MaskMode : std::uint8_t { mistake = 0, correct = 1 };

struct ModelHyper {
  int bits = 32;
  int raw_dim = 0;    // dimension of incoming feature vectors
  int model_dim = 0;  // rows of W: anchor count when kernelized, raw_dim otherwise
  int order = 0;      // Hadamard order r*
  bool kernel = false;
  double bandwidth = 1.0;
  double learning_rate = 0.1;
  int batch_size = 1;
  MaskMode mask_mode = MaskMode::mistake;
  std::uint64_t codebook_seed = 0;
  std::uint64_t projector_seed = 0;
};

/// mask_k = 1 on bits the update should touch: sign disagreement in `mistake`
/// mode, agreement in `correct` mode. sign(0) := +1.
inline Eigen::VectorXd mistake_mask(const Eigen::VectorXd& scores, const CodeVector& target,
                                    MaskMode mode = MaskMode::mistake) {
  if (scores.size() != target.size())
    fail(Errc::length_mismatch, "mistake_mask: score/target length mismatch");
  Eigen::VectorXd mask(scores.size());
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    const int predicted = scores[k] >= 0.0 ? 1 : -1;
    const bool mistaken = predicted != target[k];
    mask[k] = (mode == MaskMode::mistake ? mistaken : !mistaken) ? 1.0 : 0.0;
  }
  return mask;
}

class TrainedModel;

/// Streaming state of the per-bit perceptron: current-round weights W, the
/// running snapshot sum for the ensemble, and the target-code machinery.
class HashModel {
 public:
  HashModel(ModelHyper hyper, HadamardCodebook codebook, Projector projector,
            std::optional<AnchorSet> anchors)
      : hyper_(hyper),
        codebook_(std::move(codebook)),
        projector_(std::move(projector)),
        anchors_(std::move(anchors)),
        weights_(Eigen::MatrixXd::Zero(hyper.model_dim, hyper.bits)),
        weight_sum_(Eigen::MatrixXd::Zero(hyper.model_dim, hyper.bits)) {}

  const ModelHyper& hyper() const { return hyper_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::MatrixXd& weight_sum() const { return weight_sum_; }
  long rounds() const { return rounds_; }
  HadamardCodebook& codebook() { return codebook_; }
  const Projector& projector() const { return projector_; }
  const std::optional<AnchorSet>& anchors() const { return anchors_; }

  Eigen::VectorXd predict_scores(const Eigen::VectorXd& z) const {
    if (z.size() != weights_.rows())
      fail(Errc::dimension_mismatch, "predict_scores: feature dim " + std::to_string(z.size()) +
                                         " != model dim " + std::to_string(weights_.rows()));
    return weights_.transpose() * z;
  }

  /// Projected target code for a label set, cached per set; fuses columns for
  /// multi-label points.
  CodeVector target_for(const std::vector<std::uint32_t>& labels) {
    auto it = target_cache_.find(labels);
    if (it != target_cache_.end()) return it->second;
    CodeVector raw = labels.size() == 1 ? codebook_.assign_column(labels[0])
                                        : codebook_.fuse_multilabel(labels);
    CodeVector projected = projector_.project(raw);
    target_cache_.emplace(labels, projected);
    return projected;
  }

  /// One SGD round on a kernelized batch: A is evaluated at the pre-update W
  /// for the whole batch, then W += lr * Z (T .* A)^T, the snapshot sum
  /// absorbs the new W, and the round counter advances.
  void sgd_step(const Eigen::MatrixXd& batch, const Eigen::MatrixXi& targets, double learning_rate) {
    if (batch.cols() < 1) fail(Errc::empty_stream, "sgd_step: empty batch");
    if (batch.rows() != weights_.rows())
      fail(Errc::dimension_mismatch, "sgd_step: feature dim mismatch");
    if (targets.rows() != hyper_.bits || targets.cols() != batch.cols())
      fail(Errc::dimension_mismatch, "sgd_step: target shape mismatch");

    const Eigen::MatrixXd scores = weights_.transpose() * batch;  // r x n
    Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(hyper_.bits, batch.cols());
    for (Eigen::Index i = 0; i < batch.cols(); ++i) {
      for (int k = 0; k < hyper_.bits; ++k) {
        const int predicted = scores(k, i) >= 0.0 ? 1 : -1;
        const bool mistaken = predicted != targets(k, i);
        if (hyper_.mask_mode == MaskMode::mistake ? mistaken : !mistaken)
          masked(k, i) = static_cast<double>(targets(k, i));
      }
      mistakes_ += (hyper_.mask_mode == MaskMode::mistake)
                       ? static_cast<long>(masked.col(i).cwiseAbs().sum())
                       : 0;
    }
    weights_.noalias() += learning_rate * (batch * masked.transpose());
    weight_sum_ += weights_;
    ++rounds_;
  }

  long mistake_count() const { return mistakes_; }

  /// W_final = (1/T) * sum of snapshots.
  Eigen::MatrixXd final_weights() const {
    if (rounds_ < 1) fail(Errc::zero_rounds, "cannot finalize a model before any round");
    return weight_sum_ / static_cast<double>(rounds_);
  }

  TrainedModel finalize() const;

 private:
  ModelHyper hyper_;
  HadamardCodebook codebook_;
  Projector projector_;
  std::optional<AnchorSet> anchors_;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd weight_sum_;
  long rounds_ = 0;
  long mistakes_ = 0;
  std::map<std::vector<std::uint32_t>, CodeVector> target_cache_;
};

/// Immutable finalized model: ensembled weights plus everything needed to
/// encode raw features.
class TrainedModel {
 public:
  TrainedModel(ModelHyper hyper, Eigen::MatrixXd weights, HadamardCodebook codebook,
               Projector projector, std::optional<AnchorSet> anchors)
      : hyper_(hyper),
        weights_(std::move(weights)),
        codebook_(std::move(codebook)),
        projector_(std::move(projector)),
        anchors_(std::move(anchors)) {}

  const ModelHyper& hyper() const { return hyper_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const HadamardCodebook& codebook() const { return codebook_; }
  const Projector& projector() const { return projector_; }

  /// Kernelize raw features when the model carries anchors, else pass through.
  Eigen::MatrixXd featurize(const Eigen::MatrixXd& raw) const {
    if (raw.rows() != hyper_.raw_dim)
      fail(Errc::dimension_mismatch, "featurize: got dim " + std::to_string(raw.rows()) +
                                         ", model expects " + std::to_string(hyper_.raw_dim));
    return anchors_ ? kernel_map_batch(raw, *anchors_) : raw;
  }

  /// B = sign(W^T z(X)), packed; one item per column of `raw`.
  BinaryCodeMatrix encode(const Eigen::MatrixXd& raw) const {
    const Eigen::MatrixXd z = featurize(raw);
    return BinaryCodeMatrix::pack(weights_.transpose() * z);
  }

  // HMOH model file: header + row-major f64 weights + projector record +
  // codebook sidecar + anchor block when kernelized.
  void save(std::ostream& os) const {
    io::write_magic(os, "HMOH");
    io::write_pod<std::uint32_t>(os, 1);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(hyper_.bits));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(hyper_.order));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(hyper_.raw_dim));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(hyper_.model_dim));
    io::write_pod<std::uint8_t>(os, hyper_.kernel ? 1 : 0);
    io::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(hyper_.mask_mode));
    io::write_pod<double>(os, hyper_.bandwidth);
    io::write_pod<double>(os, hyper_.learning_rate);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(hyper_.batch_size));
    io::write_pod<std::uint64_t>(os, hyper_.codebook_seed);
    io::write_pod<std::uint64_t>(os, hyper_.projector_seed);
    for (Eigen::Index i = 0; i < weights_.rows(); ++i)
      for (Eigen::Index j = 0; j < weights_.cols(); ++j) io::write_pod<double>(os, weights_(i, j));
    projector_.save(os);
    codebook_.save(os);
    if (anchors_) {
      io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(anchors_->count()));
      io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(anchors_->dim()));
      for (int j = 0; j < anchors_->count(); ++j)
        for (int i = 0; i < anchors_->dim(); ++i) io::write_pod<double>(os, anchors_->anchors(i, j));
    }
  }

  static TrainedModel load(std::istream& is) {
    io::expect_magic(is, "HMOH", "HMOH model file");
    const auto version = io::read_pod<std::uint32_t>(is);
    if (version != 1) fail(Errc::bad_magic, "unsupported HMOH model version");
    ModelHyper h;
    h.bits = static_cast<int>(io::read_pod<std::uint32_t>(is));
    h.order = static_cast<int>(io::read_pod<std::uint32_t>(is));
    h.raw_dim = static_cast<int>(io::read_pod<std::uint32_t>(is));
    h.model_dim = static_cast<int>(io::read_pod<std::uint32_t>(is));
    h.kernel = io::read_pod<std::uint8_t>(is) != 0;
    h.mask_mode = static_cast<MaskMode>(io::read_pod<std::uint8_t>(is));
    h.bandwidth = io::read_pod<double>(is);
    h.learning_rate = io::read_pod<double>(is);
    h.batch_size = static_cast<int>(io::read_pod<std::uint32_t>(is));
    h.codebook_seed = io::read_pod<std::uint64_t>(is);
    h.projector_seed = io::read_pod<std::uint64_t>(is);
    Eigen::MatrixXd w(h.model_dim, h.bits);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = io::read_pod<double>(is);
    Projector projector = Projector::load(is);
    HadamardCodebook codebook = HadamardCodebook::load(is);
    std::optional<AnchorSet> anchors;
    if (h.kernel) {
      const auto m = static_cast<int>(io::read_pod<std::uint32_t>(is));
      const auto d = static_cast<int>(io::read_pod<std::uint32_t>(is));
      Eigen::MatrixXd a(d, m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < d; ++i) a(i, j) = io::read_pod<double>(is);
      anchors = AnchorSet{std::move(a), h.bandwidth};
    }
    return TrainedModel(h, std::move(w), std::move(codebook), std::move(projector),
                        std::move(anchors));
  }

 private:
  ModelHyper hyper_;
  Eigen::MatrixXd weights_;
  HadamardCodebook codebook_;
  Projector projector_;
  std::optional<AnchorSet> anchors_;
};

inline TrainedModel HashModel::finalize() const {
  return TrainedModel(hyper_, final_weights(), codebook_, projector_, anchors_);
}

struct TrainOptions {
  int bits = 32;
  int max_labels = 2;
  bool kernel = false;
  int anchor_count = 0;
  double bandwidth = 1.0;
  double learning_rate = 0.1;
  int batch_size = 1;
  MaskMode mask_mode = MaskMode::mistake;
  std::uint64_t codebook_seed = 1;
  std::uint64_t projector_seed = 2;
};

struct TrainResult {
  TrainedModel model;                  // ensembled weights
  Eigen::MatrixXd last_round_weights;  // W of the final round, for ablations
  long rounds = 0;
  long mistakes = 0;
  double seconds = 0.0;
  // (round, mistaken-bit fraction over the preceding window), every 1000 rounds
  std::vector<std::pair<long, double>> mistake_trace;
};

/// The full streaming loop: anchor collection (when kernelized), codebook and
/// projector construction, then one SGD round per batch in stream order.
/// `stream` holds one point per column, already in arrival order.
TrainResult train_stream(const TrainOptions& options, const Eigen::MatrixXd& stream,
                         const std::vector<std::vector<std::uint32_t>>& label_sets);

}  // namespace hmoh

#include <chrono>

namespace hmoh {

inline TrainResult train_stream(const TrainOptions& options, const Eigen::MatrixXd& stream,
                                const std::vector<std::vector<std::uint32_t>>& label_sets) {
  if (stream.cols() == 0) fail(Errc::empty_stream, "train_stream: empty stream");
  if (static_cast<std::size_t>(stream.cols()) != label_sets.size())
    fail(Errc::count_mismatch, "train_stream: feature/label count mismatch");
  if (options.batch_size < 1) fail(Errc::bad_config, "batch_size must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();

  std::optional<AnchorSet> anchors;
  Eigen::Index first_train = 0;
  if (options.kernel) {
    anchors = collect_anchors(stream, options.anchor_count, options.bandwidth);
    first_train = options.anchor_count;
  }
  if (first_train >= stream.cols())
    fail(Errc::empty_stream, "train_stream: no points left after anchor collection");

  const int order = target_order(options.bits, options.max_labels);
  ModelHyper hyper;
  hyper.bits = options.bits;
  hyper.raw_dim = static_cast<int>(stream.rows());
  hyper.model_dim = options.kernel ? options.anchor_count : hyper.raw_dim;
  hyper.order = order;
  hyper.kernel = options.kernel;
  hyper.bandwidth = options.bandwidth;
  hyper.learning_rate = options.learning_rate;
  hyper.batch_size = options.batch_size;
  hyper.mask_mode = options.mask_mode;
  hyper.codebook_seed = options.codebook_seed;
  hyper.projector_seed = options.projector_seed;

  HashModel model(hyper, build_sylvester(order, options.codebook_seed),
                  make_projector(order, options.bits, options.projector_seed), anchors);

  std::vector<std::pair<long, double>> trace;
  long window_mistakes = 0;
  long window_points = 0;
  for (Eigen::Index start = first_train; start < stream.cols(); start += options.batch_size) {
    const Eigen::Index n = std::min<Eigen::Index>(options.batch_size, stream.cols() - start);
    Eigen::MatrixXd batch = stream.middleCols(start, n);
    if (anchors) batch = kernel_map_batch(batch, *anchors);
    Eigen::MatrixXi targets(options.bits, n);
    for (Eigen::Index i = 0; i < n; ++i)
      targets.col(i) = model.target_for(label_sets[static_cast<std::size_t>(start + i)]);
    const long before = model.mistake_count();
    model.sgd_step(batch, targets, options.learning_rate);
    window_mistakes += model.mistake_count() - before;
    window_points += n;
    if (model.rounds() % 1000 == 0) {
      trace.emplace_back(model.rounds(), static_cast<double>(window_mistakes) /
                                             static_cast<double>(window_points * options.bits));
      window_mistakes = window_points = 0;
    }
  }

  TrainResult result{model.finalize(), model.weights(), model.rounds(),
                     model.mistake_count(),  0.0, std::move(trace)};
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace hmoh
