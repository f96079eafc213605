#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "partnet/tensor.hpp"

namespace partnet {

/**
 * Backbone activation volume of N channels over a W x H grid.
 *
 * Storage is a Tensor of shape {N, H, W}: channel-major, then rows of
 * width W. Spatial position p = y * W + x is the row-major index used by the
 * peak histogram and all tie-breaking rules. `stride` is the number of image
 * pixels per feature cell.
 */
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int width, int height, int stride = 1);
  FeatureMap(int channels, int width, int height, int stride, std::vector<double> values);

  int channels() const noexcept { return channels_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int stride() const noexcept { return stride_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::size_t index(int n, int x, int y) const noexcept {
    return static_cast<std::size_t>(n) * plane_size() + static_cast<std::size_t>(y) * width_ + x;
  }
  double at(int n, int x, int y) const noexcept { return values_[index(n, x, y)]; }
  double& at(int n, int x, int y) noexcept { return values_[index(n, x, y)]; }

  std::span<const double> channel(int n) const;
  const Tensor& tensor() const noexcept { return values_; }
  Tensor& tensor() noexcept { return values_; }

 private:
  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  int stride_ = 1;
  Tensor values_;
};

// Mirror along the x axis (desk-scale analog of horizontal image flip).
FeatureMap flip_horizontal(const FeatureMap& map);

struct Sample {
  FeatureMap map;
  int label = 0;
  std::string source;  // originating file or image, if any
};

/**
 * PNFM container, little-endian:
 *   "PNFM" | u32 version=1 | u32 N | u32 W | u32 H | u32 stride | u32 label |
 *   N*W*H float32, channel-major, rows of width W.
 * Values are promoted to 64-bit on load.
 */
inline constexpr std::uint32_t kPnfmVersion = 1;
inline constexpr std::size_t kPnfmHeaderBytes = 28;

std::vector<std::uint8_t> encode_pnfm(const FeatureMap& map, int label);
Sample decode_pnfm(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void write_pnfm(const std::filesystem::path& path, const FeatureMap& map, int label);
Sample read_pnfm(const std::filesystem::path& path);

// Loads a single .pnfm file, every *.pnfm in a directory (sorted by name), or
// a JSON-lines manifest of {"file": ..., "label": ...} records.
std::vector<Sample> ingest_features(const std::filesystem::path& path);

// FNV-1a 64 over the bytes; used for cross-run and cross-component checks.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

}  // namespace partnet
