#pragma once

#include <array>
#include <cstdint>

#include "wasscc/gaussian.hpp"

namespace wasscc {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// Purely functional: the word at (counter, key) never depends on call
// order, so sampling parallelizes over disjoint counter ranges and a
// given seed always reproduces the same stream bit for bit.
//
// Stream layout used throughout: key = seed split into two 32-bit words;
// counter = (index lo, index hi, component, stream id).  Every (sample,
// component) pair consumes one Philox block and keeps its low 64 bits.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint32_t stream_id)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_id_(stream_id) {}

  // Uniform draw in the open interval (0, 1); 53 usable bits.
  double uniform(std::uint64_t index, std::uint32_t component) const {
    const std::uint64_t bits = word64(index, component);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal draw by inverse-CDF transform; reproducible and
  // monotone in the underlying uniform.
  double gaussian(std::uint64_t index, std::uint32_t component) const {
    return std_quantile(ProbLevel(uniform(index, component)));
  }

  // Integer in [0, n) without stream-order dependence (fixed-point scaling;
  // bias is ~n * 2^-64, irrelevant at the sample sizes used here).
  std::uint64_t below(std::uint64_t index, std::uint32_t component,
                      std::uint64_t n) const {
    const std::uint64_t bits = word64(index, component);
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits) * n) >> 64);
  }

  std::uint64_t word64(std::uint64_t index, std::uint32_t component) const {
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(index),
        static_cast<std::uint32_t>(index >> 32), component, stream_id_};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = one_round(ctr, key);
      key[0] += 0x9E3779B9u;  // golden-ratio Weyl constants
      key[1] += 0xBB67AE85u;
    }
    return (static_cast<std::uint64_t>(ctr[1]) << 32) | ctr[0];
  }

 private:
  static std::array<std::uint32_t, 4> one_round(
      const std::array<std::uint32_t, 4>& ctr,
      const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
            static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_id_;
};

}  // namespace wasscc
