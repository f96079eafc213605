#include "partnet/roi_pool.hpp"

#include <string>

#include "partnet/errors.hpp"

namespace partnet {

BinRange roi_bin(int bin, int length, int bins) {
  const int begin = bin * length / bins;
  int end = (bin + 1) * length / bins;
  if (end <= begin) end = begin + 1;
  return {begin, end};
}

RoiFeature roi_max_pool(const FeatureMap& map, const Box& box, int m) {
  if (m < 1) throw UsageError("roi_max_pool: m must be >= 1");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= map.width() || box.y1 >= map.height() || box.x0 > box.x1 ||
      box.y0 > box.y1) {
    throw UsageError("roi_max_pool: box (" + std::to_string(box.x0) + "," + std::to_string(box.y0) + ")-(" +
                     std::to_string(box.x1) + "," + std::to_string(box.y1) + ") outside " +
                     std::to_string(map.width()) + "x" + std::to_string(map.height()) + " map");
  }
  const std::size_t mm = static_cast<std::size_t>(m);
  RoiFeature out{Tensor({static_cast<std::size_t>(map.channels()), mm, mm}),
                 std::vector<std::size_t>(static_cast<std::size_t>(map.channels()) * mm * mm)};
  const auto& src = map.tensor();
  std::size_t k = 0;
  for (int n = 0; n < map.channels(); ++n) {
    for (int by = 0; by < m; ++by) {
      const BinRange ry = roi_bin(by, box.height(), m);
      for (int bx = 0; bx < m; ++bx, ++k) {
        const BinRange rx = roi_bin(bx, box.width(), m);
        std::size_t best = map.index(n, box.x0 + rx.begin, box.y0 + ry.begin);
        // Row-major scan with strict > keeps the lowest flat index at ties.
        for (int y = box.y0 + ry.begin; y < box.y0 + ry.end; ++y) {
          for (int x = box.x0 + rx.begin; x < box.x0 + rx.end; ++x) {
            const std::size_t idx = map.index(n, x, y);
            if (src[idx] > src[best]) best = idx;
          }
        }
        out.values[k] = src[best];
        out.argmax[k] = best;
      }
    }
  }
  return out;
}

Tensor roi_max_pool_grad(const Tensor& upstream, const RoiFeature& cache, const Tensor::Shape& map_shape) {
  if (cache.argmax.empty()) throw UsageError("roi_max_pool_grad: missing forward cache");
  if (!upstream.same_shape(cache.values) || cache.argmax.size() != upstream.size()) {
    throw UsageError("roi_max_pool_grad: upstream " + upstream.shape_string() + " does not match cache " +
                     cache.values.shape_string());
  }
  Tensor grad(map_shape);
  for (std::size_t k = 0; k < upstream.size(); ++k) {
    if (cache.argmax[k] >= grad.size()) throw UsageError("roi_max_pool_grad: cache does not match map shape");
    grad[cache.argmax[k]] += upstream[k];
  }
  return grad;
}

Tensor pool_proposals(const FeatureMap& map, std::span<const Proposal> proposals, int m) {
  const std::size_t dim = static_cast<std::size_t>(map.channels()) * m * m;
  Tensor out({dim, proposals.size()});
  for (std::size_t r = 0; r < proposals.size(); ++r) {
    const RoiFeature roi = roi_max_pool(map, proposals[r].box, m);
    for (std::size_t k = 0; k < dim; ++k) out(k, r) = roi.values[k];
  }
  return out;
}

}  // namespace partnet
