#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "partnet/errors.hpp"
#include "partnet/roi_pool.hpp"
#include "support/oracles.hpp"

using namespace partnet;
namespace o = partnet::oracle;

namespace {

Box random_box(SeededRng& rng, int w, int h) {
  const int x0 = static_cast<int>(rng.below(w)), y0 = static_cast<int>(rng.below(h));
  return {x0, y0, x0 + static_cast<int>(rng.below(w - x0)), y0 + static_cast<int>(rng.below(h - y0))};
}

}  // namespace

TEST_CASE("bins cover the extent without gaps") {
  for (int len = 1; len <= 30; ++len)
    for (int m = 1; m <= 9; ++m) {
      int prev_end = 0;
      for (int b = 0; b < m; ++b) {
        const BinRange r = roi_bin(b, len, m);
        CHECK(r.end > r.begin);
        CHECK(r.begin >= 0);
        CHECK(r.end <= std::max(len, b + 1));
        if (len >= m) CHECK(r.begin == prev_end);
        prev_end = r.end;
      }
      if (len >= m) CHECK(prev_end == len);
    }
}

TEST_CASE("an m by m box crops the region") {
  SeededRng rng(201);
  FeatureMap map = o::random_map(rng, 3, 8, 8);
  const Box box{2, 1, 4, 3};
  RoiFeature f = roi_max_pool(map, box, 3);
  for (int n = 0; n < 3; ++n)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) CHECK(f.values[(n * 3 + y) * 3 + x] == map.at(n, 2 + x, 1 + y));
}

TEST_CASE("constant map pools to the constant") {
  FeatureMap map(2, 6, 5);
  for (double& v : map.tensor().values()) v = -0.75;
  RoiFeature f = roi_max_pool(map, {0, 0, 5, 4}, 4);
  for (double v : f.values.values()) CHECK(v == -0.75);
}

TEST_CASE("pooling matches the bin-scan oracle") {
  SeededRng rng(203);
  FeatureMap map = o::random_map(rng, 1, 9, 9);
  RoiFeature f = roi_max_pool(map, {0, 0, 8, 8}, 3);
  CHECK(std::vector<double>(f.values.values().begin(), f.values.values().end()) ==
        o::roi_pool(map, {0, 0, 8, 8}, 3));
  for (int i = 0; i < 300; ++i) {
    FeatureMap m2 = o::random_map(rng, 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(12)),
                                  1 + static_cast<int>(rng.below(12)));
    const Box box = random_box(rng, m2.width(), m2.height());
    const int m = 1 + static_cast<int>(rng.below(7));
    RoiFeature g = roi_max_pool(m2, box, m);
    CHECK(std::vector<double>(g.values.values().begin(), g.values.values().end()) == o::roi_pool(m2, box, m));
    for (std::size_t k = 0; k < g.argmax.size(); ++k) CHECK(m2.tensor()[g.argmax[k]] == g.values[k]);
  }
}

TEST_CASE("ties resolve to the lowest flat index") {
  FeatureMap map(1, 4, 4);
  RoiFeature f = roi_max_pool(map, {1, 1, 3, 3}, 1);
  CHECK(f.argmax[0] == map.index(0, 1, 1));
}

TEST_CASE("invalid pooling requests") {
  FeatureMap map(1, 4, 4);
  CHECK_THROWS_AS(roi_max_pool(map, {0, 0, 4, 3}, 2), UsageError);
  CHECK_THROWS_AS(roi_max_pool(map, {-1, 0, 2, 3}, 2), UsageError);
  CHECK_THROWS_AS(roi_max_pool(map, {2, 0, 1, 3}, 2), UsageError);
  CHECK_THROWS_AS(roi_max_pool(map, {0, 0, 3, 3}, 0), UsageError);
  RoiFeature f = roi_max_pool(map, {0, 0, 3, 3}, 2);
  CHECK_THROWS_AS(roi_max_pool_grad(Tensor({1, 3, 3}), f, map.tensor().shape()), UsageError);
  CHECK_THROWS_AS(roi_max_pool_grad(Tensor({1, 2, 2}), RoiFeature{}, map.tensor().shape()), UsageError);
  CHECK_THROWS_AS(roi_max_pool_grad(Tensor({1, 2, 2}), f, {1, 1, 1}), UsageError);
}

TEST_CASE("single-bin gradient lands on the maximum") {
  SeededRng rng(205);
  FeatureMap map = o::random_map(rng, 2, 5, 5);
  RoiFeature f = roi_max_pool(map, {1, 1, 3, 4}, 1);
  Tensor g = roi_max_pool_grad(Tensor({2, 1, 1}, std::vector<double>{2.0, -3.0}), f, map.tensor().shape());
  CHECK(g[f.argmax[0]] == 2.0);
  CHECK(g[f.argmax[1]] == -3.0);
  CHECK(std::count_if(g.values().begin(), g.values().end(), [](double v) { return v != 0.0; }) == 2);
}

TEST_CASE("disjoint bins give one gradient entry per bin") {
  SeededRng rng(207);
  FeatureMap map = o::random_map(rng, 1, 9, 9);
  RoiFeature f = roi_max_pool(map, {0, 0, 8, 8}, 3);
  Tensor g = roi_max_pool_grad(Tensor({1, 3, 3}, 1.0), f, map.tensor().shape());
  CHECK(std::count_if(g.values().begin(), g.values().end(), [](double v) { return v != 0.0; }) == 9);
  CHECK(std::accumulate(g.values().begin(), g.values().end(), 0.0) == 9.0);
}

TEST_CASE("overlapping bins accumulate") {
  FeatureMap map(1, 2, 2);
  map.at(0, 0, 0) = 5.0;
  // One cell wide, three bins: every bin widens onto the same source cell.
  RoiFeature f = roi_max_pool(map, {0, 0, 0, 0}, 3);
  Tensor g = roi_max_pool_grad(Tensor({1, 3, 3}, 1.0), f, map.tensor().shape());
  CHECK(g[0] == 9.0);
}

TEST_CASE("pooling gradient matches finite differences away from ties") {
  SeededRng rng(209);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    FeatureMap map = o::random_map(rng, 2, 6, 6);
    const Box box = random_box(rng, 6, 6);
    const int m = 1 + static_cast<int>(rng.below(4));
    RoiFeature f = roi_max_pool(map, box, m);
    // Skip instances where a bin's top two values are within 1e-6.
    bool near_tie = false;
    for (int n = 0; n < 2 && !near_tie; ++n)
      for (int by = 0; by < m && !near_tie; ++by)
        for (int bx = 0; bx < m && !near_tie; ++bx) {
          const BinRange xr = roi_bin(bx, box.width(), m), yr = roi_bin(by, box.height(), m);
          std::vector<double> vals;
          for (int y = yr.begin; y < yr.end; ++y)
            for (int x = xr.begin; x < xr.end; ++x) vals.push_back(map.at(n, box.x0 + x, box.y0 + y));
          std::sort(vals.rbegin(), vals.rend());
          if (vals.size() > 1 && vals[0] - vals[1] < 1e-4) near_tie = true;
        }
    if (near_tie) continue;
    Tensor w({2, static_cast<std::size_t>(m), static_cast<std::size_t>(m)});
    for (double& v : w.values()) v = rng.uniform(-1, 1);
    Tensor analytic = roi_max_pool_grad(w, f, map.tensor().shape());
    auto objective = [&](const Tensor& t) {
      FeatureMap probe(2, 6, 6, 1, std::vector<double>(t.values().begin(), t.values().end()));
      return o::weighted_sum(w, roi_max_pool(probe, box, m).values);
    };
    CHECK(o::max_relative_error(analytic, o::numeric_gradient(objective, map.tensor())) < 1e-4);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("pooling is monotone and channel-equivariant") {
  SeededRng rng(211);
  for (int i = 0; i < 100; ++i) {
    FeatureMap map = o::random_map(rng, 4, 7, 7);
    const Box box = random_box(rng, 7, 7);
    const int m = 1 + static_cast<int>(rng.below(4));
    RoiFeature base = roi_max_pool(map, box, m);

    FeatureMap bumped = map;
    bumped.tensor()[rng.below(bumped.tensor().size())] += rng.uniform(0.0, 2.0);
    RoiFeature up = roi_max_pool(bumped, box, m);
    for (std::size_t k = 0; k < base.values.size(); ++k) CHECK(up.values[k] >= base.values[k]);

    std::vector<int> perm{0, 1, 2, 3};
    rng.shuffle(std::span<int>(perm));
    FeatureMap permuted(4, 7, 7);
    for (int n = 0; n < 4; ++n)
      for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) permuted.at(n, x, y) = map.at(perm[n], x, y);
    RoiFeature p = roi_max_pool(permuted, box, m);
    const std::size_t bins = static_cast<std::size_t>(m) * m;
    for (int n = 0; n < 4; ++n)
      for (std::size_t k = 0; k < bins; ++k) CHECK(p.values[n * bins + k] == base.values[perm[n] * bins + k]);
  }
}

TEST_CASE("proposals are laid out as columns") {
  SeededRng rng(213);
  FeatureMap map = o::random_map(rng, 2, 6, 6);
  std::vector<Proposal> props{{{0, 0, 2, 2}, 0, 0}, {{1, 2, 5, 5}, 0, 1}};
  Tensor cols = pool_proposals(map, props, 2);
  REQUIRE(cols.shape() == Tensor::Shape{8, 2});
  for (std::size_t r = 0; r < 2; ++r) {
    RoiFeature f = roi_max_pool(map, props[r].box, 2);
    for (std::size_t k = 0; k < 8; ++k) CHECK(cols(k, r) == f.values[k]);
  }
}
