#pragma once

#include <Eigen/Core>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hmoh/errors.hpp"
#include "hmoh/io.hpp"

namespace hmoh {

/// Bit-packed r-bit codes for n items. Bit b of item i is 1 for code value +1
/// and 0 for -1; padding bits past r stay 0 so XOR+popcount needs no masking.
class BinaryCodeMatrix {
 public:
  BinaryCodeMatrix(std::size_t n, int bits)
      : n_(n), bits_(bits), words_per_code_((static_cast<std::size_t>(bits) + 63) / 64),
        words_(n * words_per_code_, 0) {
    if (n < 1 || bits < 1) fail(Errc::bad_config, "BinaryCodeMatrix needs n >= 1 and bits >= 1");
  }

  std::size_t size() const { return n_; }
  int bits() const { return bits_; }
  std::size_t words_per_code() const { return words_per_code_; }
  const std::uint64_t* word_data(std::size_t i) const { return words_.data() + i * words_per_code_; }

  void set_bit(std::size_t item, int bit, bool plus) {
    if (plus)
      words_[item * words_per_code_ + static_cast<std::size_t>(bit / 64)] |= 1ull << (bit % 64);
  }

  int get(std::size_t item, int bit) const {
    const std::uint64_t w = words_[item * words_per_code_ + static_cast<std::size_t>(bit / 64)];
    return (w >> (bit % 64)) & 1 ? 1 : -1;
  }

  /// Pack sign(scores) with sign(0) := +1; scores is r x n, one item per column.
  static BinaryCodeMatrix pack(const Eigen::MatrixXd& scores) {
    BinaryCodeMatrix codes(static_cast<std::size_t>(scores.cols()),
                           static_cast<int>(scores.rows()));
    for (std::size_t i = 0; i < codes.n_; ++i)
      for (int b = 0; b < codes.bits_; ++b)
        codes.set_bit(i, b, scores(b, static_cast<Eigen::Index>(i)) >= 0.0);
    return codes;
  }

  /// Pack one +/-1 code vector per column.
  static BinaryCodeMatrix pack_signs(const Eigen::MatrixXi& signs) {
    BinaryCodeMatrix codes(static_cast<std::size_t>(signs.cols()),
                           static_cast<int>(signs.rows()));
    for (std::size_t i = 0; i < codes.n_; ++i)
      for (int b = 0; b < codes.bits_; ++b)
        codes.set_bit(i, b, signs(b, static_cast<Eigen::Index>(i)) > 0);
    return codes;
  }

  int hamming(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) fail(Errc::index_out_of_bounds, "hamming: item index out of range");
    return hamming_between(*this, i, *this, j);
  }

  static int hamming_between(const BinaryCodeMatrix& a, std::size_t i, const BinaryCodeMatrix& b,
                             std::size_t j) {
    const std::uint64_t* wa = a.word_data(i);
    const std::uint64_t* wb = b.word_data(j);
    int d = 0;
    for (std::size_t w = 0; w < a.words_per_code_; ++w) d += std::popcount(wa[w] ^ wb[w]);
    return d;
  }

  // BCMX file: magic, version u32, n u64, r u32, then words little-endian.
  void save(std::ostream& os) const {
    io::write_magic(os, "BCMX");
    io::write_pod<std::uint32_t>(os, 1);
    io::write_pod<std::uint64_t>(os, n_);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(bits_));
    io::write_span(os, words_.data(), words_.size());
  }

  static BinaryCodeMatrix load(std::istream& is) {
    io::expect_magic(is, "BCMX", "BCMX code file");
    const auto version = io::read_pod<std::uint32_t>(is);
    if (version != 1) fail(Errc::bad_magic, "unsupported BCMX version");
    const auto n = io::read_pod<std::uint64_t>(is);
    const auto bits = static_cast<int>(io::read_pod<std::uint32_t>(is));
    BinaryCodeMatrix codes(n, bits);
    io::read_span(is, codes.words_.data(), codes.words_.size());
    return codes;
  }

 private:
  std::size_t n_;
  int bits_;
  std::size_t words_per_code_;
  std::vector<std::uint64_t> words_;
};

}  // namespace hmoh
