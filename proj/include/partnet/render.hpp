#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "partnet/dpp.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/parts.hpp"

namespace partnet {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
  std::array<std::uint8_t, 3> pixel(int x, int y) const;
  void set(int x, int y, std::array<std::uint8_t, 3> color);
};

// Binary PPM (P6, maxval 255).
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Channel-max heatmap, min-max normalized, upsampled by the map stride.
RgbImage heatmap(const FeatureMap& map);

// One-pixel outline of an image-coordinate box, clipped to the image.
void draw_rect(RgbImage& image, const Box& box, std::array<std::uint8_t, 3> color);

std::array<std::uint8_t, 3> detector_color(int detector);

// Draws each detector's top-1 box (feature box * stride) onto `source`, or
// onto a heatmap of the map when no source is given. Returns the image;
// `drawn` receives the number of rectangles.
RgbImage render_boxes(const Sample& sample, const PartExtraction& extraction, const RgbImage* source = nullptr,
                      int* drawn = nullptr);

}  // namespace partnet
