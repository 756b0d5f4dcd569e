#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hmoh/errors.hpp"
#include "hmoh/eval.hpp"
#include "hmoh/io.hpp"
#include "hmoh/rng.hpp"

namespace hmoh {

/// In-memory dataset: one point per column, one (sorted) label set per point.
struct Dataset {
  Eigen::MatrixXd features;  // d x n
  std::vector<LabelSet> labels;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.rows()); }

  Dataset select(const std::vector<std::uint32_t>& indices) const {
    Dataset out;
    out.features.resize(features.rows(), static_cast<Eigen::Index>(indices.size()));
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out.features.col(static_cast<Eigen::Index>(i)) = features.col(indices[i]);
      out.labels.push_back(labels[indices[i]]);
    }
    return out;
  }
};

enum class Normalization { none, scale255, unit_l2 };

inline void normalize(Dataset& ds, Normalization mode) {
  switch (mode) {
    case Normalization::none:
      break;
    case Normalization::scale255:
      ds.features /= 255.0;
      break;
    case Normalization::unit_l2:
      for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        const double n = ds.features.col(j).norm();
        if (n > 0) ds.features.col(j) /= n;
      }
      break;
  }
}

// --- IDX (MNIST) ------------------------------------------------------------

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = io::open_in(images_path);
  if (io::read_u32_be(img) != 0x00000803u)
    fail(Errc::bad_magic, "not an IDX image file: " + images_path);
  const std::uint32_t n = io::read_u32_be(img);
  const std::uint32_t rows = io::read_u32_be(img);
  const std::uint32_t cols = io::read_u32_be(img);
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;

  auto lab = io::open_in(labels_path);
  if (io::read_u32_be(lab) != 0x00000801u)
    fail(Errc::bad_magic, "not an IDX label file: " + labels_path);
  const std::uint32_t n_labels = io::read_u32_be(lab);
  if (n != n_labels)
    fail(Errc::count_mismatch, "IDX image/label counts differ: " + std::to_string(n) + " vs " +
                                   std::to_string(n_labels));

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(dim), n);
  ds.labels.resize(n);
  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    io::read_span(img, buf.data(), dim);
    for (std::size_t k = 0; k < dim; ++k)
      ds.features(static_cast<Eigen::Index>(k), i) = static_cast<double>(buf[k]);
    ds.labels[i] = {static_cast<std::uint32_t>(io::read_pod<unsigned char>(lab))};
  }
  return ds;
}

// --- DNSF dense features: magic, n u64, d u32, then row-major f32 -----------

inline void save_dnsf(std::ostream& os, const Eigen::MatrixXd& features) {
  io::write_magic(os, "DNSF");
  io::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(features.cols()));
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.cols(); ++i)
    for (Eigen::Index k = 0; k < features.rows(); ++k)
      io::write_pod<float>(os, static_cast<float>(features(k, i)));
}

inline Eigen::MatrixXd load_dnsf(std::istream& is) {
  io::expect_magic(is, "DNSF", "DNSF feature file");
  const auto n = io::read_pod<std::uint64_t>(is);
  const auto d = io::read_pod<std::uint32_t>(is);
  Eigen::MatrixXd features(d, static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint32_t k = 0; k < d; ++k)
      features(k, static_cast<Eigen::Index>(i)) = io::read_pod<float>(is);
  return features;
}

// --- CSV features (comma-separated reals, no header, one item per line) -----

inline Eigen::MatrixXd load_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      fail(Errc::count_mismatch, "ragged CSV feature file");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(Errc::truncated_file, "empty CSV feature file");
  Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.front().size()),
                           static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[i][k];
  return features;
}

// --- Label text files: one line per item, space-separated integer ids -------

inline std::vector<LabelSet> load_labels_text(std::istream& is) {
  std::vector<LabelSet> labels;
  std::string line;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    LabelSet set;
    std::uint32_t id;
    while (ss >> id) set.push_back(id);
    if (set.empty()) fail(Errc::count_mismatch, "item without labels in label file");
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    labels.push_back(std::move(set));
  }
  return labels;
}

// --- Splits and streaming ---------------------------------------------------

struct SplitSpec {
  int query_per_class = 0;  // per-class query sampling; 0 means use query_count
  std::size_t query_count = 0;
  std::size_t train_count = 0;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::uint32_t> query;
  std::vector<std::uint32_t> retrieval;
  std::vector<std::uint32_t> train;  // subset of retrieval
};

namespace detail {
inline std::vector<std::uint32_t> sample_without_replacement(std::vector<std::uint32_t> pool,
                                                             std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}
}  // namespace detail

/// Query set sampled without replacement (per class when query_per_class > 0,
/// keyed on each item's first label), retrieval = remainder, train sampled
/// from retrieval. Identical seed gives identical index lists.
inline Split split(const Dataset& ds, const SplitSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t n = ds.size();
  std::vector<bool> is_query(n, false);

  if (spec.query_per_class > 0) {
    std::map<std::uint32_t, std::vector<std::uint32_t>> by_class;
    for (std::uint32_t i = 0; i < n; ++i) by_class[ds.labels[i].front()].push_back(i);
    for (auto& [cls, members] : by_class) {
      if (members.size() < static_cast<std::size_t>(spec.query_per_class))
        fail(Errc::split_infeasible, "class " + std::to_string(cls) + " has only " +
                                         std::to_string(members.size()) + " items, need " +
                                         std::to_string(spec.query_per_class) + " queries");
      for (std::uint32_t i : detail::sample_without_replacement(
               members, static_cast<std::size_t>(spec.query_per_class), rng))
        is_query[i] = true;
    }
  } else {
    if (spec.query_count > n) fail(Errc::split_infeasible, "query_count exceeds dataset size");
    std::vector<std::uint32_t> all(n);
    for (std::uint32_t i = 0; i < n; ++i) all[i] = i;
    for (std::uint32_t i : detail::sample_without_replacement(all, spec.query_count, rng))
      is_query[i] = true;
  }

  Split out;
  for (std::uint32_t i = 0; i < n; ++i) (is_query[i] ? out.query : out.retrieval).push_back(i);
  if (spec.train_count > out.retrieval.size())
    fail(Errc::split_infeasible, "train_count " + std::to_string(spec.train_count) +
                                     " exceeds retrieval size " +
                                     std::to_string(out.retrieval.size()));
  out.train = detail::sample_without_replacement(out.retrieval, spec.train_count, rng);
  std::sort(out.train.begin(), out.train.end());
  return out;
}

/// Stream order over a train set: a single seeded permutation, no revisits.
/// Consumers cut it into batches of n_t themselves.
inline std::vector<std::uint32_t> stream_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(order[i], order[j]);
  }
  return order;
}

}  // namespace hmoh
