#pragma once

#include <stdexcept>
#include <string>

namespace hmoh {

// Error classes map 1:1 onto CLI exit codes (see README).
enum class Errc : int {
  ok = 0,
  bad_config = 1,
  not_power_of_two = 2,
  order_too_large = 3,
  columns_exhausted = 4,
  dimension_mismatch = 5,
  length_mismatch = 6,
  insufficient_data = 7,
  bit_length_exceeds_order = 8,
  zero_rounds = 9,
  empty_stream = 10,
  model_not_finalized = 11,
  index_out_of_bounds = 12,
  bad_magic = 13,
  truncated_file = 14,
  count_mismatch = 15,
  split_infeasible = 16,
  empty_database = 17,
  empty_curve = 18,
  io_error = 19,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace hmoh
