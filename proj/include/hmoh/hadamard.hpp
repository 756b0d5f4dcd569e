#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <vector>

#include "hmoh/errors.hpp"
#include "hmoh/rng.hpp"

namespace hmoh {

using CodeVector = Eigen::VectorXi;  // entries in {-1,+1}

/// Sylvester Hadamard codebook plus the label -> column registry.
///
/// Columns of the order x order +/-1 matrix serve as per-class target codes.
/// Columns are handed out randomly without replacement as new labels arrive.
class HadamardCodebook {
 public:
  HadamardCodebook(int order, std::uint64_t seed)
      : order_(order), seed_(seed), rng_(seed), matrix_(build_sylvester_matrix(order)) {
    free_columns_.resize(static_cast<std::size_t>(order));
    for (int j = 0; j < order; ++j) free_columns_[static_cast<std::size_t>(j)] = j;
  }

  int order() const { return order_; }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXi& matrix() const { return matrix_; }
  const std::map<std::uint32_t, int>& assignment() const { return assignment_; }
  std::size_t free_count() const { return free_columns_.size(); }

  /// Column for `label`, drawing a fresh random column on first sight.
  /// Idempotent for already-seen labels.
  CodeVector assign_column(std::uint32_t label) {
    auto it = assignment_.find(label);
    if (it == assignment_.end()) {
      if (free_columns_.empty())
        fail(Errc::columns_exhausted,
             "no free Hadamard column for label " + std::to_string(label) +
                 " (order " + std::to_string(order_) + ")");
      const std::size_t pick = rng_.uniform_index(free_columns_.size());
      const int col = free_columns_[pick];
      free_columns_.erase(free_columns_.begin() + static_cast<std::ptrdiff_t>(pick));
      it = assignment_.emplace(label, col).first;
    }
    return matrix_.col(it->second);
  }

  /// Multi-label target: per-bit majority vote across the labels' columns,
  /// then zero votes filled to balance +1/-1 counts.
  CodeVector fuse_multilabel(const std::vector<std::uint32_t>& labels) {
    if (labels.empty()) fail(Errc::bad_config, "fuse_multilabel requires at least one label");
    Eigen::VectorXi sum = Eigen::VectorXi::Zero(order_);
    for (std::uint32_t l : labels) sum += assign_column(l);

    CodeVector code(order_);
    int pos = 0, neg = 0;
    for (int i = 0; i < order_; ++i) {
      code[i] = sum[i] > 0 ? 1 : (sum[i] < 0 ? -1 : 0);
      if (code[i] > 0) ++pos;
      if (code[i] < 0) ++neg;
    }
    // Fill zeros: deficient sign first (ascending index), then alternate
    // starting with +1 once counts are equal.
    bool next_plus = true;
    for (int i = 0; i < order_; ++i) {
      if (code[i] != 0) continue;
      if (pos < neg) {
        code[i] = 1;
        ++pos;
      } else if (neg < pos) {
        code[i] = -1;
        ++neg;
      } else {
        code[i] = next_plus ? 1 : -1;
        next_plus ? ++pos : ++neg;
        next_plus = !next_plus;
      }
    }
    return code;
  }

  // --- HADC sidecar: magic, version u32, order u32, seed u64, count u32,
  // then (label u32, column u32) pairs. Free-column order is rebuilt
  // deterministically (ascending index minus assigned).
  void save(std::ostream& os) const;
  static HadamardCodebook load(std::istream& is);

  /// The Sylvester recursion H_{2k} = [[H_k, H_k], [H_k, -H_k]], H_2 = [[1,1],[1,-1]].
  static Eigen::MatrixXi build_sylvester_matrix(int order) {
    if (order < 2 || (order & (order - 1)) != 0)
      fail(Errc::not_power_of_two, "Hadamard order must be a power of two >= 2, got " +
                                       std::to_string(order));
    if (order > kMaxOrder)
      fail(Errc::order_too_large, "Hadamard order " + std::to_string(order) + " exceeds cap " +
                                      std::to_string(kMaxOrder));
    Eigen::MatrixXi h(2, 2);
    h << 1, 1, 1, -1;
    while (h.rows() < order) {
      const int n = static_cast<int>(h.rows());
      Eigen::MatrixXi next(2 * n, 2 * n);
      next.topLeftCorner(n, n) = h;
      next.topRightCorner(n, n) = h;
      next.bottomLeftCorner(n, n) = h;
      next.bottomRightCorner(n, n) = -h;
      h = std::move(next);
    }
    return h;
  }

  static constexpr int kMaxOrder = 1 << 15;

 private:
  HadamardCodebook(int order, std::uint64_t seed, Eigen::MatrixXi matrix)
      : order_(order), seed_(seed), rng_(seed), matrix_(std::move(matrix)) {}

  int order_;
  std::uint64_t seed_;
  Rng rng_;
  Eigen::MatrixXi matrix_;
  std::map<std::uint32_t, int> assignment_;
  std::vector<int> free_columns_;
};

inline HadamardCodebook build_sylvester(int order, std::uint64_t seed = 0) {
  return HadamardCodebook(order, seed);
}

/// Smallest power of two >= both the hash length and the class count.
inline int target_order(int bits, int max_labels) {
  if (bits < 1 || max_labels < 1)
    fail(Errc::bad_config, "target_order requires bits >= 1 and max_labels >= 1");
  int g = 2;
  while (g < bits || g < max_labels) {
    if (g > HadamardCodebook::kMaxOrder / 2)
      fail(Errc::order_too_large, "target order exceeds cap");
    g *= 2;
  }
  return g;
}

}  // namespace hmoh

#include "hmoh/io.hpp"

namespace hmoh {

inline void HadamardCodebook::save(std::ostream& os) const {
  io::write_magic(os, "HADC");
  io::write_pod<std::uint32_t>(os, 1);  // version
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(order_));
  io::write_pod<std::uint64_t>(os, seed_);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(assignment_.size()));
  for (const auto& [label, col] : assignment_) {
    io::write_pod<std::uint32_t>(os, label);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(col));
  }
}

inline HadamardCodebook HadamardCodebook::load(std::istream& is) {
  io::expect_magic(is, "HADC", "HADC codebook");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != 1) fail(Errc::bad_magic, "unsupported HADC version");
  const auto order = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const auto seed = io::read_pod<std::uint64_t>(is);
  HadamardCodebook cb(order, seed, build_sylvester_matrix(order));
  const auto count = io::read_pod<std::uint32_t>(is);
  std::vector<bool> taken(static_cast<std::size_t>(order), false);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = io::read_pod<std::uint32_t>(is);
    const auto col = io::read_pod<std::uint32_t>(is);
    if (col >= static_cast<std::uint32_t>(order) || taken[col])
      fail(Errc::bad_magic, "corrupt HADC assignment");
    taken[col] = true;
    cb.assignment_.emplace(label, static_cast<int>(col));
  }
  cb.free_columns_.clear();
  for (int j = 0; j < order; ++j)
    if (!taken[static_cast<std::size_t>(j)]) cb.free_columns_.push_back(j);
  return cb;
}

}  // namespace hmoh
