#pragma once

#include <optional>
#include <utility>

#include "hmoh/config.hpp"
#include "hmoh/data.hpp"
#include "hmoh/eval.hpp"
#include "hmoh/trainer.hpp"

namespace hmoh {

/// One end-to-end experiment on an already-loaded dataset:
/// split -> stream -> train -> encode query/retrieval -> evaluate.
struct ExperimentResult {
  TrainResult train;
  EvalReport report;
  std::optional<EvalReport> last_round_report;  // same protocol, pre-ensemble weights
};

inline Eigen::MatrixXd stream_features(const Dataset& train_set,
                                       const std::vector<std::uint32_t>& order) {
  Eigen::MatrixXd out(train_set.features.rows(), static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = train_set.features.col(order[i]);
  return out;
}

inline ExperimentResult run_experiment(const RunConfig& cfg, const Dataset& ds,
                                       bool eval_last_round = false) {
  const Split sp = split(ds, SplitSpec{cfg.query_per_class, cfg.query_count, cfg.train_count,
                                       cfg.seed_split});
  const Dataset train_set = ds.select(sp.train);
  const auto order = stream_permutation(train_set.size(), cfg.seed_stream);
  Eigen::MatrixXd stream = stream_features(train_set, order);
  std::vector<LabelSet> stream_labels(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) stream_labels[i] = train_set.labels[order[i]];

  ExperimentResult result{train_stream(cfg.train_options(), stream, stream_labels), {}, {}};

  const Dataset query_set = ds.select(sp.query);
  const Dataset db_set = ds.select(sp.retrieval);
  const BinaryCodeMatrix query_codes = result.train.model.encode(query_set.features);
  const BinaryCodeMatrix db_codes = result.train.model.encode(db_set.features);
  result.report = evaluate(query_codes, db_codes, query_set.labels, db_set.labels, cfg.map_cutoff,
                           cfg.precision_ks);

  if (eval_last_round) {
    const TrainedModel& m = result.train.model;
    const BinaryCodeMatrix q2 = BinaryCodeMatrix::pack(result.train.last_round_weights.transpose() *
                                                       m.featurize(query_set.features));
    const BinaryCodeMatrix d2 = BinaryCodeMatrix::pack(result.train.last_round_weights.transpose() *
                                                       m.featurize(db_set.features));
    result.last_round_report =
        evaluate(q2, d2, query_set.labels, db_set.labels, cfg.map_cutoff, cfg.precision_ks);
  }
  return result;
}

/// Untrained Gaussian sign-projection baseline on the raw features.
inline TrainedModel make_lsh_baseline(const RunConfig& cfg, int raw_dim, std::uint64_t seed) {
  const int order = target_order(cfg.bits, cfg.max_labels);
  ModelHyper h;
  h.bits = cfg.bits;
  h.raw_dim = raw_dim;
  h.model_dim = raw_dim;
  h.order = order;
  h.kernel = false;
  h.learning_rate = 0.0;
  h.batch_size = cfg.batch_size;
  Rng rng(seed);
  Eigen::MatrixXd w(raw_dim, cfg.bits);
  for (int j = 0; j < cfg.bits; ++j)
    for (int i = 0; i < raw_dim; ++i) w(i, j) = rng.gaussian();
  return TrainedModel(h, std::move(w), build_sylvester(order, seed),
                      make_projector(order, cfg.bits, seed), std::nullopt);
}

}  // namespace hmoh
