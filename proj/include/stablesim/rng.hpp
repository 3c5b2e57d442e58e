#pragma once

// Counter-based randomness. Every draw in the library is a pure function of a
// RandomKey, so any entry of any keyed stream can be recomputed in isolation
// and results are independent of evaluation order and thread count.

#include <array>
#include <cstdint>

namespace stablesim {

// Disjoint stream families. Two keys that differ in any field (tag included)
// index statistically independent draws.
enum class StreamTag : std::uint32_t {
  array_entry = 1,          // triangular-array entry at literal column j
  array_entry_shifted = 2,  // shifted half of a coupled pair when the literal
                            // column index would not fit in 64 bits
  tower_level = 3,          // orbit start-level selection
  tower_digit = 4,          // base-refinement digits consumed by tower labels
  oracle_entry = 5,         // i.i.d. reference letters for orbit-law checks
  generic = 6,
};

struct RandomKey {
  std::uint64_t master_seed = 0;
  std::uint32_t k = 0;        // row / scale index
  std::uint64_t j = 0;        // column, level, or offset within the stream
  std::uint32_t replica = 0;  // replica or orbit id
  StreamTag tag = StreamTag::generic;
  std::uint32_t draw = 0;     // sub-draw counter inside one (k, j, replica) cell
};

namespace detail {

// Philox 4x32-10 block cipher (counter mode PRNG).
inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round != 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
  }
  return ctr;
}

// Counter layout: the 64-bit column fills words 0..1, the replica word 2, and
// word 3 packs (tag << 24 | draw << 16 | k). k is capped at 16 bits and draw
// at 8 so distinct keys can never collide in the packed word.
inline std::array<std::uint32_t, 4> pack_counter(const RandomKey& key) {
  const std::uint32_t tagged = (static_cast<std::uint32_t>(key.tag) << 24) |
                               ((key.draw & 0xFFu) << 16) | (key.k & 0xFFFFu);
  return {std::uint32_t(key.j), std::uint32_t(key.j >> 32), key.replica, tagged};
}

}  // namespace detail

// 128 bits of key-indexed randomness, as two 64-bit words.
inline std::array<std::uint64_t, 2> random_bits(const RandomKey& key) {
  const auto out = detail::philox4x32_10(
      detail::pack_counter(key),
      {std::uint32_t(key.master_seed), std::uint32_t(key.master_seed >> 32)});
  return {(std::uint64_t(out[0]) << 32) | out[1], (std::uint64_t(out[2]) << 32) | out[3]};
}

// Maps 64 random bits to the open interval (0,1) on the 53-bit midpoint grid
// ((x >> 11) + 0.5) * 2^-53. The top class alone rounds to 1.0 (2^53 - 0.5 is
// not representable) and is clamped to the largest double below one.
inline double unit_open(std::uint64_t bits) {
  const double u = (double(bits >> 11) + 0.5) * 0x1.0p-53;
  return u < 1.0 ? u : 0x1.fffffffffffffp-1;
}

struct UniformPair {
  double u1, u2;  // independent, each strictly inside (0,1)
};

inline UniformPair uniform_pair(const RandomKey& key) {
  const auto bits = random_bits(key);
  return {unit_open(bits[0]), unit_open(bits[1])};
}

}  // namespace stablesim
