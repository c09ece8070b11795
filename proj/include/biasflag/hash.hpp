#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace biasflag {

// 64-bit FNV-1a over raw bytes.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;

inline constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                       std::uint64_t state = kFnvOffset) noexcept {
  for (char c : bytes) {
    state ^= static_cast<unsigned char>(c);
    state *= kFnvPrime;
  }
  return state;
}

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded stable hash used for feature bucketing and example identity.
// Definition: mix64(fnv1a64(le64(seed) ++ bytes)). Test vectors live in
// tests/test_features.cpp; changing this invalidates every saved model.
inline constexpr std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t state = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    state ^= (seed >> (8 * i)) & 0xffU;
    state *= kFnvPrime;
  }
  return mix64(fnv1a64(bytes, state));
}

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace biasflag
