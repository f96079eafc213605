#include "partnet/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partnet/errors.hpp"

namespace partnet {
namespace {

int nearest_odd(double v) {
  const int odd = 2 * static_cast<int>(std::round((v - 1.0) / 2.0)) + 1;
  return std::max(odd, 1);
}

// Start of cell `i` of `cells` along an axis of `extent`; the last cell ends
// at `extent`.
int cell_start(int i, int cells, int extent) { return i * (extent / cells); }
int cell_end(int i, int cells, int extent) { return i + 1 == cells ? extent : (i + 1) * (extent / cells); }

}  // namespace

int AnchorShape::width() const {
  if (ratio.w == ratio.h) return size;
  return nearest_odd(size * std::sqrt(static_cast<double>(ratio.w) / ratio.h));
}

int AnchorShape::height() const {
  if (ratio.w == ratio.h) return size;
  return nearest_odd(size * std::sqrt(static_cast<double>(ratio.h) / ratio.w));
}

AnchorSpec AnchorSpec::table_default() {
  AnchorSpec spec;
  spec.shapes.push_back({3, {1, 1}});
  for (int side = 5; side <= 21; side += 2) {
    spec.shapes.push_back({side, {1, 1}});
    spec.shapes.push_back({side, {1, 2}});
    spec.shapes.push_back({side, {2, 1}});
  }
  return spec;
}

double iou(const Box& a, const Box& b) {
  const int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  const double inter = static_cast<double>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
  return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

PeakHistogram peak_histogram(const FeatureMap& map) {
  if (map.channels() < 1 || map.width() < 1 || map.height() < 1) {
    throw UsageError("peak_histogram: empty feature map");
  }
  PeakHistogram hist{map.width(), map.height(), std::vector<std::uint32_t>(map.plane_size(), 0)};
  for (int n = 0; n < map.channels(); ++n) {
    const auto plane = map.channel(n);
    // max_element returns the first maximum, i.e. the lowest row-major index.
    const auto best = std::max_element(plane.begin(), plane.end());
    ++hist.counts[static_cast<std::size_t>(best - plane.begin())];
  }
  return hist;
}

std::vector<GridPos> select_cell_anchors(const PeakHistogram& hist, int cells) {
  if (cells < 1) throw ConfigError("select_cell_anchors: S must be >= 1");
  if (cells > hist.width || cells > hist.height) {
    throw ConfigError("select_cell_anchors: S=" + std::to_string(cells) + " exceeds map size " +
                      std::to_string(hist.width) + "x" + std::to_string(hist.height));
  }
  std::vector<GridPos> anchors;
  anchors.reserve(static_cast<std::size_t>(cells) * cells);
  for (int cy = 0; cy < cells; ++cy) {
    for (int cx = 0; cx < cells; ++cx) {
      const int x_begin = cell_start(cx, cells, hist.width), y_begin = cell_start(cy, cells, hist.height);
      GridPos best{x_begin, y_begin};
      std::uint32_t best_count = hist.at(best.x, best.y);
      for (int y = y_begin; y < cell_end(cy, cells, hist.height); ++y) {
        for (int x = x_begin; x < cell_end(cx, cells, hist.width); ++x) {
          if (hist.at(x, y) > best_count) {
            best_count = hist.at(x, y);
            best = {x, y};
          }
        }
      }
      anchors.push_back(best);
    }
  }
  return anchors;
}

std::vector<Proposal> generate_proposals(std::span<const GridPos> anchors, const AnchorSpec& spec, int width,
                                         int height) {
  std::vector<Proposal> out;
  out.reserve(anchors.size() * spec.count());
  for (std::size_t cell = 0; cell < anchors.size(); ++cell) {
    const GridPos a = anchors[cell];
    if (a.x < 0 || a.y < 0 || a.x >= width || a.y >= height) {
      throw UsageError("generate_proposals: anchor (" + std::to_string(a.x) + "," + std::to_string(a.y) +
                       ") outside " + std::to_string(width) + "x" + std::to_string(height) + " map");
    }
    for (std::size_t k = 0; k < spec.count(); ++k) {
      const int half_w = (spec.shapes[k].width() - 1) / 2;
      const int half_h = (spec.shapes[k].height() - 1) / 2;
      Box box{std::max(a.x - half_w, 0), std::max(a.y - half_h, 0), std::min(a.x + half_w, width - 1),
              std::min(a.y + half_h, height - 1)};
      out.push_back({box, static_cast<int>(cell), static_cast<int>(k)});
    }
  }
  return out;
}

AnchorSpec subsample_proposals(const AnchorSpec& spec, int k_target) {
  if (k_target != 3 && k_target != 7 && k_target != 14 && k_target != 28) {
    throw ConfigError("subsample_proposals: K must be one of 3, 7, 14, 28 (got " + std::to_string(k_target) + ")");
  }
  const int total = static_cast<int>(spec.count());
  if (k_target > total) {
    throw ConfigError("subsample_proposals: K=" + std::to_string(k_target) + " exceeds " + std::to_string(total) +
                      " available boxes");
  }
  std::vector<std::size_t> ranked(spec.count());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return spec.shapes[a].nominal_area() < spec.shapes[b].nominal_area();
  });
  // Midpoint of each of k_target equal strata of the ranked list.
  AnchorSpec out;
  for (int i = 0; i < k_target; ++i) {
    const int rank = (2 * i + 1) * total / (2 * k_target);
    out.shapes.push_back(spec.shapes[ranked[static_cast<std::size_t>(rank)]]);
  }
  return out;
}

std::vector<Proposal> discretized_part_proposals(const FeatureMap& map, int cells, const AnchorSpec& spec) {
  const auto anchors = select_cell_anchors(peak_histogram(map), cells);
  return generate_proposals(anchors, spec, map.width(), map.height());
}

nlohmann::json proposal_json(const Proposal& p, int stride) {
  const Box img = p.box.scaled(stride);
  return {{"cell_index", p.cell_index},
          {"anchor_index", p.anchor_index},
          {"box", {p.box.x0, p.box.y0, p.box.x1, p.box.y1}},
          {"image_box", {img.x0, img.y0, img.x1, img.y1}}};
}

}  // namespace partnet
