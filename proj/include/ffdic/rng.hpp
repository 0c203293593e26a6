#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ffdic {

/// Identifier written into reports so runs can be reproduced.
inline constexpr std::string_view kPrngName =
    "mt19937_64 seeded via splitmix64 substreams (libstdc++ distributions)";

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Named substreams so that dot placement and noise never share a sequence.
enum class Stream : std::uint64_t {
  kDots = 1,
  kNoise = 2,
};

constexpr std::uint64_t substream_seed(std::uint64_t seed, Stream stream,
                                       std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(stream) << 56)) + index);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return std::mt19937_64(substream_seed(seed, stream, index));
}

}  // namespace ffdic
