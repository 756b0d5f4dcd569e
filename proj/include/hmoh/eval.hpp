#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hmoh/codec.hpp"
#include "hmoh/errors.hpp"

namespace hmoh {

using LabelSet = std::vector<std::uint32_t>;  // kept sorted

/// Two items are relevant iff they share at least one label.
inline bool relevant(const LabelSet& a, const LabelSet& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    (*ia < *ib) ? ++ia : ++ib;
  }
  return false;
}

struct EvalReport {
  double map = 0.0;
  std::optional<std::pair<int, double>> map_at_k;
  double prec_at_h2 = 0.0;
  std::vector<std::pair<int, double>> prec_at_k_curve;
  std::vector<std::pair<double, double>> pr_curve;  // (recall, precision)
  double pr_auc = 0.0;
  double seconds = 0.0;
};

namespace detail {

inline int eval_thread_count(std::size_t queries) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* cap = std::getenv("HADHASH_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1 && static_cast<unsigned>(v) < n) n = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(queries, 1)));
}

// Per-query ranking by (Hamming distance, db index) via counting sort over
// distance buckets; bucket traversal in index order realizes the tie-break.
struct QueryRanking {
  std::vector<std::vector<std::uint32_t>> buckets;  // buckets[d] = db indices at distance d
};

inline QueryRanking rank_query(const BinaryCodeMatrix& query_codes, std::size_t q,
                               const BinaryCodeMatrix& db_codes) {
  QueryRanking r;
  r.buckets.assign(static_cast<std::size_t>(query_codes.bits()) + 1, {});
  for (std::size_t j = 0; j < db_codes.size(); ++j) {
    const int d = BinaryCodeMatrix::hamming_between(query_codes, q, db_codes, j);
    r.buckets[static_cast<std::size_t>(d)].push_back(static_cast<std::uint32_t>(j));
  }
  return r;
}

struct PerQuery {
  double ap = 0.0;
  double ball_precision = 0.0;
  std::vector<double> prec_at_k;            // aligned with requested ks
  std::vector<std::int64_t> hits_by_dist;   // relevant retrieved at distance exactly d
  std::vector<std::int64_t> count_by_dist;  // retrieved at distance exactly d
  std::int64_t total_relevant = 0;
};

inline PerQuery eval_query(const BinaryCodeMatrix& query_codes, std::size_t q,
                           const BinaryCodeMatrix& db_codes,
                           const std::vector<LabelSet>& query_labels,
                           const std::vector<LabelSet>& db_labels, std::optional<int> map_cutoff,
                           int ball_radius, const std::vector<int>& ks) {
  const QueryRanking ranking = rank_query(query_codes, q, db_codes);
  const int bits = query_codes.bits();
  PerQuery out;
  out.hits_by_dist.assign(static_cast<std::size_t>(bits) + 1, 0);
  out.count_by_dist.assign(static_cast<std::size_t>(bits) + 1, 0);

  std::int64_t rank = 0, hits = 0, cutoff_hits = 0;
  std::int64_t ball_total = 0, ball_hits = 0;
  double ap_sum = 0.0;
  std::size_t k_cursor = 0;
  std::vector<double> prec_at_k(ks.size(), 0.0);

  for (int d = 0; d <= bits; ++d) {
    for (std::uint32_t j : ranking.buckets[static_cast<std::size_t>(d)]) {
      ++rank;
      out.count_by_dist[static_cast<std::size_t>(d)] += 1;
      const bool rel = relevant(query_labels[q], db_labels[j]);
      if (rel) {
        ++hits;
        ++out.total_relevant;
        out.hits_by_dist[static_cast<std::size_t>(d)] += 1;
        if (!map_cutoff || rank <= *map_cutoff) {
          ap_sum += static_cast<double>(hits) / static_cast<double>(rank);
          ++cutoff_hits;
        }
      }
      if (d <= ball_radius) {
        ++ball_total;
        if (rel) ++ball_hits;
      }
      while (k_cursor < ks.size() && rank == ks[k_cursor]) {
        prec_at_k[k_cursor] = static_cast<double>(hits) / static_cast<double>(rank);
        ++k_cursor;
      }
    }
  }
  // short database: remaining K points use the full-list precision
  while (k_cursor < ks.size()) {
    prec_at_k[k_cursor] =
        rank > 0 ? static_cast<double>(hits) / static_cast<double>(rank) : 0.0;
    ++k_cursor;
  }

  const std::int64_t denom =
      map_cutoff ? std::min<std::int64_t>(*map_cutoff, out.total_relevant) : out.total_relevant;
  out.ap = denom > 0 ? ap_sum / static_cast<double>(denom) : 0.0;
  out.ball_precision =
      ball_total > 0 ? static_cast<double>(ball_hits) / static_cast<double>(ball_total) : 0.0;
  out.prec_at_k = std::move(prec_at_k);
  (void)cutoff_hits;
  return out;
}

inline std::vector<PerQuery> eval_all_queries(const BinaryCodeMatrix& query_codes,
                                              const BinaryCodeMatrix& db_codes,
                                              const std::vector<LabelSet>& query_labels,
                                              const std::vector<LabelSet>& db_labels,
                                              std::optional<int> map_cutoff, int ball_radius,
                                              const std::vector<int>& ks) {
  if (db_codes.size() == 0) fail(Errc::empty_database, "evaluation requires a nonempty database");
  if (query_codes.bits() != db_codes.bits())
    fail(Errc::length_mismatch, "query/db code lengths differ");
  if (query_labels.size() != query_codes.size() || db_labels.size() != db_codes.size())
    fail(Errc::count_mismatch, "label/code count mismatch");

  const std::size_t nq = query_codes.size();
  std::vector<PerQuery> results(nq);
  const int threads = eval_thread_count(nq);
  if (threads <= 1) {
    for (std::size_t q = 0; q < nq; ++q)
      results[q] = eval_query(query_codes, q, db_codes, query_labels, db_labels, map_cutoff,
                              ball_radius, ks);
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t q = static_cast<std::size_t>(t); q < nq;
           q += static_cast<std::size_t>(threads))
        results[q] = eval_query(query_codes, q, db_codes, query_labels, db_labels, map_cutoff,
                                ball_radius, ks);
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

}  // namespace detail

inline double mean_average_precision(const BinaryCodeMatrix& query_codes,
                                     const BinaryCodeMatrix& db_codes,
                                     const std::vector<LabelSet>& query_labels,
                                     const std::vector<LabelSet>& db_labels,
                                     std::optional<int> cutoff = std::nullopt) {
  const auto per = detail::eval_all_queries(query_codes, db_codes, query_labels, db_labels, cutoff,
                                            -1, {});
  double sum = 0.0;
  for (const auto& p : per) sum += p.ap;
  return per.empty() ? 0.0 : sum / static_cast<double>(per.size());
}

inline double precision_at_hamming_radius(const BinaryCodeMatrix& query_codes,
                                          const BinaryCodeMatrix& db_codes,
                                          const std::vector<LabelSet>& query_labels,
                                          const std::vector<LabelSet>& db_labels, int radius = 2) {
  const auto per = detail::eval_all_queries(query_codes, db_codes, query_labels, db_labels,
                                            std::nullopt, radius, {});
  double sum = 0.0;
  for (const auto& p : per) sum += p.ball_precision;
  return per.empty() ? 0.0 : sum / static_cast<double>(per.size());
}

inline std::vector<std::pair<int, double>> precision_at_k(
    const BinaryCodeMatrix& query_codes, const BinaryCodeMatrix& db_codes,
    const std::vector<LabelSet>& query_labels, const std::vector<LabelSet>& db_labels,
    std::vector<int> ks) {
  for (int k : ks)
    if (k < 1) fail(Errc::bad_config, "precision@K requires K >= 1");
  std::sort(ks.begin(), ks.end());
  const auto per = detail::eval_all_queries(query_codes, db_codes, query_labels, db_labels,
                                            std::nullopt, -1, ks);
  std::vector<std::pair<int, double>> curve;
  curve.reserve(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double sum = 0.0;
    for (const auto& p : per) sum += p.prec_at_k[i];
    curve.emplace_back(ks[i], per.empty() ? 0.0 : sum / static_cast<double>(per.size()));
  }
  return curve;
}

/// Micro-averaged PR points swept over Hamming thresholds 0..r; thresholds
/// retrieving nothing are dropped.
inline std::vector<std::pair<double, double>> pr_curve(const BinaryCodeMatrix& query_codes,
                                                       const BinaryCodeMatrix& db_codes,
                                                       const std::vector<LabelSet>& query_labels,
                                                       const std::vector<LabelSet>& db_labels) {
  const auto per = detail::eval_all_queries(query_codes, db_codes, query_labels, db_labels,
                                            std::nullopt, -1, {});
  const int bits = query_codes.bits();
  std::int64_t total_relevant = 0;
  for (const auto& p : per) total_relevant += p.total_relevant;

  std::vector<std::pair<double, double>> curve;
  std::int64_t retrieved = 0, hits = 0;
  for (int d = 0; d <= bits; ++d) {
    for (const auto& p : per) {
      retrieved += p.count_by_dist[static_cast<std::size_t>(d)];
      hits += p.hits_by_dist[static_cast<std::size_t>(d)];
    }
    if (retrieved == 0) continue;
    const double recall =
        total_relevant > 0 ? static_cast<double>(hits) / static_cast<double>(total_relevant) : 0.0;
    const double precision = static_cast<double>(hits) / static_cast<double>(retrieved);
    curve.emplace_back(recall, precision);
  }
  return curve;
}

/// Trapezoid area of (x, y) points sorted by x, normalized to the x-range.
/// A single point (or zero range) degenerates to its y value.
inline double auc(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) fail(Errc::empty_curve, "auc of an empty curve");
  const double range = points.back().first - points.front().first;
  if (points.size() == 1 || range <= 0.0) return points.back().second;
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& [x0, y0] = points[i - 1];
    const auto& [x1, y1] = points[i];
    area += 0.5 * (y0 + y1) * (x1 - x0);
  }
  return area / range;
}

/// All metrics in one pass over the rankings.
inline EvalReport evaluate(const BinaryCodeMatrix& query_codes, const BinaryCodeMatrix& db_codes,
                           const std::vector<LabelSet>& query_labels,
                           const std::vector<LabelSet>& db_labels,
                           std::optional<int> map_cutoff = std::nullopt,
                           std::vector<int> ks = {}) {
  std::sort(ks.begin(), ks.end());
  const auto per = detail::eval_all_queries(query_codes, db_codes, query_labels, db_labels,
                                            map_cutoff, 2, ks);
  EvalReport report;
  const double nq = static_cast<double>(per.size());
  for (const auto& p : per) {
    report.map += p.ap / nq;
    report.prec_at_h2 += p.ball_precision / nq;
  }
  if (map_cutoff) report.map_at_k = {*map_cutoff, report.map};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double sum = 0.0;
    for (const auto& p : per) sum += p.prec_at_k[i];
    report.prec_at_k_curve.emplace_back(ks[i], sum / nq);
  }
  // rebuild the PR sweep from the per-query distance histograms
  const int bits = query_codes.bits();
  std::int64_t total_relevant = 0;
  for (const auto& p : per) total_relevant += p.total_relevant;
  std::int64_t retrieved = 0, hits = 0;
  for (int d = 0; d <= bits; ++d) {
    for (const auto& p : per) {
      retrieved += p.count_by_dist[static_cast<std::size_t>(d)];
      hits += p.hits_by_dist[static_cast<std::size_t>(d)];
    }
    if (retrieved == 0) continue;
    const double recall =
        total_relevant > 0 ? static_cast<double>(hits) / static_cast<double>(total_relevant) : 0.0;
    report.pr_curve.emplace_back(recall, static_cast<double>(hits) / static_cast<double>(retrieved));
  }
  if (!report.pr_curve.empty()) report.pr_auc = auc(report.pr_curve);
  return report;
}

}  // namespace hmoh
