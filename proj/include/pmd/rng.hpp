#pragma once

#include <array>
#include <cstdint>

namespace pmd {

// Philox4x32-10 counter-based generator. Each (key, counter) pair maps to an
// independent 128-bit random block, so a draw indexed by (seed, repeat, row)
// is the same number no matter which thread computes it or in what order.
class Philox {
public:
  using ctr_t = std::array<std::uint32_t, 4>;
  using key_t = std::array<std::uint32_t, 2>;

  static ctr_t block(ctr_t ctr, key_t key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  // Uniform double in [0, 1) from the (seed, r, i) substream.
  static double u01(std::uint64_t seed, std::uint64_t r, std::uint64_t i) {
    ctr_t ctr = {static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32),
                 static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    key_t key = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    ctr_t out = block(ctr, key);
    std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  // 64-bit mix of (seed, r, i); used to derive per-replicate sub-seeds.
  static std::uint64_t mix64(std::uint64_t seed, std::uint64_t r, std::uint64_t i = 0) {
    ctr_t ctr = {static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32),
                 static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    key_t key = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    ctr_t out = block(ctr, key);
    return (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  }

private:
  static ctr_t single_round(const ctr_t& ctr, const key_t& key) {
    std::uint64_t p0 = 0xD2511F53ull * ctr[0];
    std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
};

}  // namespace pmd
