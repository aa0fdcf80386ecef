#pragma once

// Bit-growth mathematics for chains of consecutive additions: the predicted
// step of the n-th carry-out, the gap between consecutive carry-outs, and a
// brute-force accumulation oracle the closed forms are checked against.
// Everything is exact unbounded-integer arithmetic.

#include <gmpxx.h>

#include <stdexcept>
#include <vector>

namespace fxpath {

// Position N of the highest data bit of a chain operand (0-indexed,
// little-endian). An operand with N = 7 is the usual 8-bit integer whose
// maximal value is 2^8 - 1.
struct OperandWidth {
  int n = 0;

  explicit OperandWidth(int highest_bit) : n(highest_bit) {
    if (n < 0) throw std::invalid_argument("operand bit position must be >= 0");
  }

  int bit_length() const { return n + 1; }

  // Largest operand value, 2^(N+1) - 1.
  mpz_class max_operand() const {
    mpz_class m = 1;
    m <<= static_cast<unsigned long>(n + 1);
    return m - 1;
  }
};

namespace detail {
inline mpz_class pow2(long e) {
  mpz_class p = 1;
  p <<= static_cast<unsigned long>(e);
  return p;
}
}  // namespace detail

// Worst-case accumulated value once k extra bits have appeared: the all-ones
// pattern 2^(N+k) - 1.
inline mpz_class worst_case_result(OperandWidth w, int k) {
  if (k < 1) throw std::invalid_argument("overflow count must be >= 1");
  return detail::pow2(w.n + k) - 1;
}

// Predicted number of additions between the k-th and (k+1)-th carry-out,
// floor(2^(N+k) / (2^(N+1) - 1)).
inline mpz_class steps_between_overflows(OperandWidth w, int k) {
  if (k < 1) throw std::invalid_argument("overflow index must be >= 1");
  return mpz_class(detail::pow2(w.n + k) / w.max_operand());
}

// Step index S_n of the n-th carry-out, floor(2^(N+n) / (2^(N+1) - 1)).
inline mpz_class overflow_step(OperandWidth w, int n) {
  if (n < 1) throw std::invalid_argument("overflow index must be >= 1");
  return mpz_class(detail::pow2(w.n + n) / w.max_operand());
}

// Brute-force oracle: bit length of the worst-case accumulator after s
// additions of maximal operands, i.e. of (s + 1) * (2^(N+1) - 1).
inline int oracle_bit_length(OperandWidth w, long s) {
  if (s < 0) throw std::invalid_argument("step index must be >= 0");
  mpz_class acc = (mpz_class(s) + 1) * w.max_operand();
  return static_cast<int>(mpz_sizeinbase(acc.get_mpz_t(), 2));
}

// Number of carry-outs that have occurred by step s, per the oracle.
inline int growth_at_step(OperandWidth w, long s) {
  return oracle_bit_length(w, s) - w.bit_length();
}

struct GrowthProfile {
  OperandWidth width;
  long steps = 0;
  std::vector<long> overflow_positions;  // step indices where the width grew
  std::vector<int> bit_lengths;          // resulting width at each of those steps
};

// Scans steps 1..steps and records every step where the oracle bit length
// grows. Reproduces the accumulation-experiment table for any N.
inline GrowthProfile profile(OperandWidth w, long steps) {
  if (steps < 1) throw std::invalid_argument("step count must be >= 1");
  GrowthProfile p{w, steps, {}, {}};
  int last = w.bit_length();
  for (long s = 1; s <= steps; ++s) {
    int bl = oracle_bit_length(w, s);
    if (bl > last) {
      p.overflow_positions.push_back(s);
      p.bit_lengths.push_back(bl);
      last = bl;
    }
  }
  return p;
}

}  // namespace fxpath
