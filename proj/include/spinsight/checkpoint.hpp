#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spinsight/autograd.hpp"

namespace spinsight {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named tensors plus the training step and a plain-text config echo.
// Byte layout (all integers little-endian):
//   "SPTCKPT\0"                         8 bytes
//   u32 version
//   u64 step
//   u32 config length, config bytes
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes
//     u32 rank, rank x u64 dims
//     product(dims) x f64 (IEEE-754, little-endian)
struct Checkpoint {
  std::uint64_t step = 0;
  std::string config;
  std::vector<std::pair<std::string, ag::Tensor>> tensors;

  const ag::Tensor* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& c);
// Throws IoFailure on malformed input.
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Adds every parameter as prefix + name.
void append_parameters(Checkpoint& c, const std::string& prefix,
                       const ag::Parameters& params);
// Copies prefix + name tensors into params; shapes must match.
void load_parameters(const Checkpoint& c, const std::string& prefix,
                     ag::Parameters& params);

}  // namespace spinsight
