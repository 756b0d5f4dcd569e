#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "hmoh/errors.hpp"
#include "hmoh/hadamard.hpp"
#include "hmoh/io.hpp"
#include "hmoh/rng.hpp"

namespace hmoh {

/// Length alignment for target codes: identity when r = r*, otherwise a fixed
/// r* x r standard-Gaussian sign projection c~ = sign(W~^T c).
class Projector {
 public:
  static Projector make(int order, int bits, std::uint64_t seed) {
    if (bits > order)
      fail(Errc::bit_length_exceeds_order, "hash length " + std::to_string(bits) +
                                               " exceeds codebook order " + std::to_string(order));
    Projector p;
    p.order_ = order;
    p.bits_ = bits;
    p.seed_ = seed;
    if (bits < order) {
      Rng rng(seed);
      p.matrix_.resize(order, bits);
      for (int j = 0; j < bits; ++j)
        for (int i = 0; i < order; ++i) p.matrix_(i, j) = rng.gaussian();
    }
    return p;
  }

  bool identity() const { return matrix_.size() == 0; }
  int order() const { return order_; }
  int bits() const { return bits_; }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  /// sign(W~^T c), with sign(0) := +1.
  CodeVector project(const CodeVector& code) const {
    if (code.size() != order_)
      fail(Errc::length_mismatch, "project: code length " + std::to_string(code.size()) +
                                      " != order " + std::to_string(order_));
    if (identity()) return code;
    Eigen::VectorXd s = matrix_.transpose() * code.cast<double>();
    CodeVector out(bits_);
    for (int j = 0; j < bits_; ++j) out[j] = s[j] >= 0.0 ? 1 : -1;
    return out;
  }

  // Persisted as: mode u8 (0 identity, 1 gaussian), gaussian method u8,
  // order u32, bits u32, seed u64. The matrix is regenerated from the seed.
  void save(std::ostream& os) const {
    io::write_pod<std::uint8_t>(os, identity() ? 0 : 1);
    io::write_pod<std::uint8_t>(os, Rng::kGaussianMethodBoxMuller);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(order_));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(bits_));
    io::write_pod<std::uint64_t>(os, seed_);
  }

  static Projector load(std::istream& is) {
    const auto mode = io::read_pod<std::uint8_t>(is);
    const auto method = io::read_pod<std::uint8_t>(is);
    if (method != Rng::kGaussianMethodBoxMuller)
      fail(Errc::bad_magic, "unknown gaussian sampling method in projector record");
    const auto order = static_cast<int>(io::read_pod<std::uint32_t>(is));
    const auto bits = static_cast<int>(io::read_pod<std::uint32_t>(is));
    const auto seed = io::read_pod<std::uint64_t>(is);
    if ((mode == 0) != (bits == order)) fail(Errc::bad_magic, "inconsistent projector record");
    return make(order, bits, seed);
  }

 private:
  int order_ = 0;
  int bits_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd matrix_;  // empty in identity mode
};

inline Projector make_projector(int order, int bits, std::uint64_t seed) {
  return Projector::make(order, bits, seed);
}

}  // namespace hmoh
