#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "atpg/policy.hpp"

namespace atpg {

class ChecksumMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Any structural problem with a checkpoint file (truncation, bad magic,
/// unsupported version, header/payload disagreement).
class CheckpointFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  PolicyParams params;
  ControlBounds bounds;
  std::uint64_t training_seed = 0;
  int epoch = 0;
};

namespace checkpoint {

inline constexpr char kMagic[4] = {'A', 'T', 'P', 'G'};
inline constexpr std::uint32_t kVersion = 1;

/// Layout:
///   "ATPG" | u32 version | u32 header length | JSON header | f64[n_p] theta | u32 CRC32
/// All integers and floats little-endian; the CRC covers every preceding byte.
std::vector<unsigned char> encode(const Checkpoint& ckpt);
Checkpoint decode(const std::vector<unsigned char>& bytes);

void save(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load(const std::filesystem::path& path);

}  // namespace checkpoint
}  // namespace atpg
