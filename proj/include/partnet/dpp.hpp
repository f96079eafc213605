#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "partnet/feature_map.hpp"

namespace partnet {

// Discretized part proposals: anchors at per-cell maxima of the channel-wise
// peak histogram, with a fixed set of boxes around each anchor.

struct PeakHistogram {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;  // row-major, position y * width + x

  std::uint32_t at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
};

struct GridPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// Width:height. {1, 2} is a tall box.
struct AspectRatio {
  int w = 1;
  int h = 1;
  friend bool operator==(const AspectRatio&, const AspectRatio&) = default;
};

// Nominal square side `size` (feature cells); the ratio is applied with the
// area held at size^2, and each extent is rounded to the nearest odd integer
// so the box stays centered on its anchor.
struct AnchorShape {
  int size = 1;
  AspectRatio ratio;

  int width() const;
  int height() const;
  int nominal_area() const { return size * size; }
  friend bool operator==(const AnchorShape&, const AnchorShape&) = default;
};

struct AnchorSpec {
  std::vector<AnchorShape> shapes;

  std::size_t count() const noexcept { return shapes.size(); }
  // 28 boxes: side 3 at 1:1, sides 5..21 (odd) at 1:1, 1:2, 2:1.
  static AnchorSpec table_default();
  friend bool operator==(const AnchorSpec&, const AnchorSpec&) = default;
};

// Inclusive corners in feature-map coordinates.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  long area() const noexcept { return static_cast<long>(width()) * height(); }
  Box scaled(int stride) const noexcept {
    return {x0 * stride, y0 * stride, (x1 + 1) * stride - 1, (y1 + 1) * stride - 1};
  }
  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

struct Proposal {
  Box box;
  int cell_index = 0;
  int anchor_index = 0;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

PeakHistogram peak_histogram(const FeatureMap& map);

// S x S partition, remainder rows/columns absorbed by the last cell on each
// axis. Returns one anchor per cell in row-major cell order.
std::vector<GridPos> select_cell_anchors(const PeakHistogram& hist, int cells);

std::vector<Proposal> generate_proposals(std::span<const GridPos> anchors, const AnchorSpec& spec, int width,
                                         int height);

// Area-ranked uniform subsample; k_target in {3, 7, 14, 28}.
AnchorSpec subsample_proposals(const AnchorSpec& spec, int k_target);

// The whole pipeline on one map.
std::vector<Proposal> discretized_part_proposals(const FeatureMap& map, int cells, const AnchorSpec& spec);

nlohmann::json proposal_json(const Proposal& p, int stride);

}  // namespace partnet
