#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "partnet/tensor.hpp"

namespace partnet {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/**
 * PNCK container, little-endian:
 *   "PNCK" | u32 version=1 |
 *   u32 len | kind (UTF-8) | u32 len | config text (key=value lines) |
 *   u32 blob count | per blob: u32 len | name | u32 rank | u64 dims[rank] |
 *   f64 values[prod(dims)] in row-major order.
 */
struct Checkpoint {
  std::string kind;
  std::string config;
  std::vector<NamedTensor> blobs;

  const Tensor& blob(const std::string& name) const;
  bool has(const std::string& name) const;
};

inline constexpr std::uint32_t kPnckVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace partnet
