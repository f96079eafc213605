#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "partnet/dpp.hpp"
#include "partnet/errors.hpp"
#include "support/oracles.hpp"

using namespace partnet;
namespace o = partnet::oracle;

namespace {

PeakHistogram random_histogram(SeededRng& rng, int w, int h) {
  PeakHistogram hist{w, h, std::vector<std::uint32_t>(static_cast<std::size_t>(w) * h)};
  for (auto& c : hist.counts) c = static_cast<std::uint32_t>(rng.below(4));
  return hist;
}

Box unclipped(GridPos a, const AnchorShape& s) {
  return {a.x - s.width() / 2, a.y - s.height() / 2, a.x + s.width() / 2, a.y + s.height() / 2};
}

}  // namespace

TEST_CASE("histogram of channels sharing one peak") {
  FeatureMap map(3, 5, 4);
  for (int n = 0; n < 3; ++n) map.at(n, 0, 0) = 1.0;
  PeakHistogram h = peak_histogram(map);
  CHECK(h.at(0, 0) == 3);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0u) == 3);
}

TEST_CASE("constant map votes at position zero") {
  FeatureMap map(4, 6, 6);
  for (double& v : map.tensor().values()) v = 2.5;
  CHECK(peak_histogram(map).counts[0] == 4);
}

TEST_CASE("histogram matches the exhaustive argmax oracle") {
  SeededRng rng(101);
  for (int i = 0; i < 64; ++i) {
    FeatureMap map = o::random_map(rng, 8, 6, 6);
    CHECK(peak_histogram(map).counts == o::histogram(map));
  }
}

TEST_CASE("histogram keeps ties on the lowest row-major position") {
  FeatureMap map(1, 4, 4);
  map.at(0, 3, 1) = 1.0;
  map.at(0, 2, 2) = 1.0;
  CHECK(peak_histogram(map).at(3, 1) == 1);
}

TEST_CASE("empty feature maps cannot be built") {
  CHECK_THROWS_AS(FeatureMap(0, 4, 4), UsageError);
  CHECK_THROWS_AS(peak_histogram(FeatureMap()), UsageError);
}

TEST_CASE("histogram is invariant to positive scaling and shifts per channel") {
  SeededRng rng(103);
  for (int i = 0; i < 50; ++i) {
    FeatureMap map = o::random_map(rng, 6, 7, 5);
    FeatureMap moved = map;
    for (int n = 0; n < map.channels(); ++n) {
      const double scale = rng.uniform(0.1, 10.0), shift = rng.uniform(-5.0, 5.0);
      for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) moved.at(n, x, y) = scale * map.at(n, x, y) + shift;
    }
    const PeakHistogram a = peak_histogram(map), b = peak_histogram(moved);
    CHECK(a.counts == b.counts);
    std::uint32_t total = 0;
    for (auto c : a.counts) {
      CHECK(c <= 6u);
      total += c;
    }
    CHECK(total == 6u);
  }
}

TEST_CASE("single cell anchors at the global maximum") {
  PeakHistogram h{3, 3, {0, 1, 0, 0, 0, 4, 4, 0, 0}};
  auto anchors = select_cell_anchors(h, 1);
  REQUIRE(anchors.size() == 1);
  CHECK(anchors[0] == GridPos{2, 1});
}

TEST_CASE("four by four cells on a 28 by 28 map") {
  SeededRng rng(105);
  PeakHistogram h = random_histogram(rng, 28, 28);
  auto anchors = select_cell_anchors(h, 4);
  REQUIRE(anchors.size() == 16);
  for (std::size_t c = 0; c < anchors.size(); ++c) {
    CHECK(anchors[c].x / 7 == static_cast<int>(c % 4));
    CHECK(anchors[c].y / 7 == static_cast<int>(c / 4));
  }
}

TEST_CASE("cell anchors match the per-cell scan oracle") {
  SeededRng rng(107);
  for (int i = 0; i < 200; ++i) {
    const int w = 2 + static_cast<int>(rng.below(11)), h = 2 + static_cast<int>(rng.below(11));
    const int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(w, h))));
    PeakHistogram hist = random_histogram(rng, w, h);
    CHECK(select_cell_anchors(hist, s) == o::cell_anchors(hist.counts, w, h, s));
  }
  PeakHistogram hist = random_histogram(rng, 6, 6);
  CHECK(select_cell_anchors(hist, 2) == o::cell_anchors(hist.counts, 6, 6, 2));
}

TEST_CASE("too many cells is a configuration error") {
  PeakHistogram h{3, 5, std::vector<std::uint32_t>(15)};
  CHECK_THROWS_AS(select_cell_anchors(h, 4), ConfigError);
  CHECK_THROWS_AS(select_cell_anchors(h, 0), ConfigError);
}

TEST_CASE("default anchor table") {
  const AnchorSpec spec = AnchorSpec::table_default();
  REQUIRE(spec.count() == 28);
  CHECK(spec.shapes[0] == AnchorShape{3, {1, 1}});
  std::set<std::pair<int, std::pair<int, int>>> seen;
  for (const auto& s : spec.shapes) seen.insert({s.size, {s.ratio.w, s.ratio.h}});
  CHECK(seen.size() == 28);
  for (int side = 5; side <= 21; side += 2)
    for (auto r : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 1}}) CHECK(seen.count({side, r}) == 1);
  for (const auto& s : spec.shapes) {
    CHECK(s.width() % 2 == 1);
    CHECK(s.height() % 2 == 1);
    if (s.ratio.w < s.ratio.h) CHECK(s.height() > s.width());
    if (s.ratio.w > s.ratio.h) CHECK(s.width() > s.height());
    // Area preserving: the extents stay within an odd step of size/sqrt2, size*sqrt2.
    if (s.ratio.w != s.ratio.h) {
      const double lo = s.size / std::sqrt(2.0), hi = s.size * std::sqrt(2.0);
      CHECK(std::abs(std::min(s.width(), s.height()) - lo) <= 1.0);
      CHECK(std::abs(std::max(s.width(), s.height()) - hi) <= 1.0);
    }
  }
}

TEST_CASE("centered anchor on a 28 by 28 map") {
  const AnchorSpec spec = AnchorSpec::table_default();
  const GridPos centre{14, 14};
  auto props = generate_proposals(std::span(&centre, 1), spec, 28, 28);
  REQUIRE(props.size() == 28);
  const auto big = std::find_if(spec.shapes.begin(), spec.shapes.end(),
                                [](const AnchorShape& s) { return s.size == 21 && s.ratio == AspectRatio{1, 1}; });
  const Proposal& p = props[static_cast<std::size_t>(big - spec.shapes.begin())];
  CHECK(p.box.width() == 21);
  CHECK(p.box.height() == 21);
  CHECK(p.box == Box{4, 4, 24, 24});
}

TEST_CASE("corner anchor clips every box") {
  const GridPos corner{0, 0};
  for (const auto& p : generate_proposals(std::span(&corner, 1), AnchorSpec::table_default(), 28, 28)) {
    CHECK(p.box.x0 == 0);
    CHECK(p.box.y0 == 0);
    // Half extents never exceed 14, the longest box being 29 cells.
    CHECK(p.box.x1 <= 14);
    CHECK(p.box.y1 <= 14);
  }
}

TEST_CASE("unclipped boxes are centered on their anchors") {
  SeededRng rng(109);
  const AnchorSpec spec = AnchorSpec::table_default();
  for (int i = 0; i < 100; ++i) {
    const int w = 1 + static_cast<int>(rng.below(40)), h = 1 + static_cast<int>(rng.below(40));
    std::vector<GridPos> anchors(1 + rng.below(5));
    for (auto& a : anchors) a = {static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h))};
    auto props = generate_proposals(anchors, spec, w, h);
    REQUIRE(props.size() == anchors.size() * spec.count());
    for (std::size_t k = 0; k < props.size(); ++k) {
      const auto& p = props[k];
      const GridPos a = anchors[k / spec.count()];
      const Box free = unclipped(a, spec.shapes[k % spec.count()]);
      CHECK((free.x0 + free.x1) / 2 == a.x);
      CHECK((free.y0 + free.y1) / 2 == a.y);
      CHECK(p.box == Box{std::max(free.x0, 0), std::max(free.y0, 0), std::min(free.x1, w - 1), std::min(free.y1, h - 1)});
      CHECK(p.cell_index == static_cast<int>(k / spec.count()));
      CHECK(p.anchor_index == static_cast<int>(k % spec.count()));
      CHECK((0 <= p.box.x0 && p.box.x0 <= p.box.x1 && p.box.x1 < w));
      CHECK((0 <= p.box.y0 && p.box.y0 <= p.box.y1 && p.box.y1 < h));
    }
  }
}

TEST_CASE("out-of-bounds anchors are rejected") {
  const GridPos bad{5, 0};
  CHECK_THROWS_AS(generate_proposals(std::span(&bad, 1), AnchorSpec::table_default(), 5, 5), UsageError);
}

TEST_CASE("subsampling by area rank") {
  const AnchorSpec full = AnchorSpec::table_default();
  CHECK(subsample_proposals(full, 28) == full);
  CHECK_THROWS_AS(subsample_proposals(full, 5), ConfigError);
  CHECK_THROWS_AS(subsample_proposals(full, 0), ConfigError);

  std::vector<AnchorShape> ranked = full.shapes;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const AnchorShape& a, const AnchorShape& b) { return a.nominal_area() < b.nominal_area(); });
  for (int k : {3, 7, 14}) {
    const AnchorSpec sub = subsample_proposals(full, k);
    REQUIRE(sub.count() == static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) CHECK(sub.shapes[i] == ranked[(2 * i + 1) * 28 / (2 * k)]);
    for (const auto& s : sub.shapes) CHECK(std::find(full.shapes.begin(), full.shapes.end(), s) != full.shapes.end());
    for (int i = 1; i < k; ++i) CHECK(sub.shapes[i - 1].nominal_area() <= sub.shapes[i].nominal_area());
  }
  const AnchorSpec three = subsample_proposals(full, 3);
  CHECK(three.shapes.front().size < 11);
  CHECK(three.shapes.back().size > 15);
}

TEST_CASE("the full pipeline is deterministic and has S^2 K proposals") {
  SeededRng rng(111);
  for (int i = 0; i < 20; ++i) {
    FeatureMap map = o::random_map(rng, 8, 12, 10);
    for (int k : {3, 7, 14, 28}) {
      const AnchorSpec spec = subsample_proposals(AnchorSpec::table_default(), k);
      auto a = discretized_part_proposals(map, 3, spec);
      auto b = discretized_part_proposals(map, 3, spec);
      CHECK(a == b);
      CHECK(a.size() == 9u * k);
    }
  }
}

TEST_CASE("proposal export carries both coordinate frames") {
  Proposal p{{1, 2, 3, 4}, 5, 6};
  const auto j = proposal_json(p, 16);
  CHECK(j["box"] == nlohmann::json::array({1, 2, 3, 4}));
  CHECK(j["image_box"] == nlohmann::json::array({16, 32, 63, 79}));
  CHECK(j["cell_index"] == 5);
  CHECK(j["anchor_index"] == 6);
}

TEST_CASE("iou of boxes") {
  CHECK(iou({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({0, 0, 1, 0}, {1, 0, 2, 0}) == doctest::Approx(1.0 / 3.0));
}
