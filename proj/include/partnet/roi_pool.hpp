#pragma once

#include <span>
#include <vector>

#include "partnet/dpp.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

// Max-pooled RoI of shape {N, m, m}. argmax[k] is the flat FeatureMap index
// (FeatureMap::index) that supplied values[k].
struct RoiFeature {
  Tensor values;
  std::vector<std::size_t> argmax;
};

// Half-open source range [begin, end) of bin `bin` over an extent of `length`
// cells split into `bins`; never empty.
struct BinRange {
  int begin;
  int end;
};
BinRange roi_bin(int bin, int length, int bins);

RoiFeature roi_max_pool(const FeatureMap& map, const Box& box, int m);

// Scatters `upstream` ({N, m, m}) back onto a {N, H, W} gradient.
Tensor roi_max_pool_grad(const Tensor& upstream, const RoiFeature& cache, const Tensor::Shape& map_shape);

// Pools every proposal and lays them out as columns of an (N*m*m) x R matrix,
// each column being the vectorized {N, m, m} RoI.
Tensor pool_proposals(const FeatureMap& map, std::span<const Proposal> proposals, int m);

}  // namespace partnet
