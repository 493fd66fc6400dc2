#pragma once

#include <cstdint>
#include <random>

namespace atpg {

/// Purpose tags that separate independent random streams.
enum class StreamTag : std::uint64_t {
  Layout = 1,
  TargetInput = 2,
  ProcessNoise = 3,
  SensorNoise = 4,
  TrainEpisode = 5,
  EvalEpisode = 6,
  HeldOutEpisode = 7,
  TargetCount = 8,
  PolicyInit = 9,
  GradCheck = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of the stream identified by (seed, index, tag). Streams never share
/// state, so serial and parallel consumers see the same numbers.
inline std::uint64_t streamSeed(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ static_cast<std::uint64_t>(tag));
}

inline std::mt19937_64 makeStream(std::uint64_t seed, std::uint64_t index, StreamTag tag) {
  return std::mt19937_64(streamSeed(seed, index, tag));
}

}  // namespace atpg
