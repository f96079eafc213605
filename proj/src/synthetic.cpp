#include "partnet/synthetic.hpp"

#include <cstdlib>

#include "partnet/rng.hpp"

namespace partnet {
namespace {

constexpr std::uint64_t kGeometryStream = 11;
constexpr std::uint64_t kNoiseStream = 12;

// Tent minus its mean over the size x size square, scaled so the center is
// `peak`. The patch adds nothing to the channel sum.
void add_patch(FeatureMap& map, int first_channel, int count, GridPos center, int size, double peak) {
  const int half = (size - 1) / 2;
  const double axis_mean = static_cast<double>(half + 1) / size;
  const double mean = axis_mean * axis_mean;
  if (size == 1) {
    for (int n = first_channel; n < first_channel + count; ++n) map.at(n, center.x, center.y) += peak;
    return;
  }

  for (int dy = -half; dy <= half; ++dy) {
    const double wy = 1.0 - std::abs(dy) / static_cast<double>(half + 1);
    for (int dx = -half; dx <= half; ++dx) {
      const double wx = 1.0 - std::abs(dx) / static_cast<double>(half + 1);
      for (int n = first_channel; n < first_channel + count; ++n) {
        map.at(n, center.x + dx, center.y + dy) += peak * ((wx * wy - mean) / (1.0 - mean));
      }
    }
  }
}

GridPos random_center(SeededRng& rng, int size, int width, int height) {
  const int half = (size - 1) / 2;
  const int x = rng.between(half, width - 1 - half);
  const int y = rng.between(half, height - 1 - half);
  return {x, y};
}

SyntheticSample make_sample(const SyntheticTaskSpec& spec, int label, SeededRng& geometry, SeededRng& noise) {
  SyntheticSample s;
  FeatureMap map(spec.channels, spec.width, spec.height, spec.stride);
  if (spec.noise > 0.0) {
    for (double& v : map.tensor().values()) v = spec.noise * noise.normal();
  }
  s.center = random_center(geometry, spec.patch, spec.width, spec.height);
  add_patch(map, first_signal_channel(spec, label), spec.signal_channels, s.center, spec.patch, spec.amplitude);
  const int half = (spec.patch - 1) / 2;
  s.patch = {s.center.x - half, s.center.y - half, s.center.x + half, s.center.y + half};

  if (spec.distractor > 0.0) {
    for (int other = 0; other < spec.classes; ++other) {
      if (other == label) continue;
      const int first = first_signal_channel(spec, other);
      for (int n = first; n < first + spec.signal_channels; ++n) {
        const GridPos c = random_center(geometry, spec.patch, spec.width, spec.height);
        add_patch(map, n, 1, c, spec.patch, spec.distractor * spec.amplitude);
      }
    }
  }
  s.sample.map = std::move(map);
  s.sample.label = label;
  return s;
}

}  // namespace

int first_signal_channel(const SyntheticTaskSpec& spec, int label) { return label * spec.signal_channels; }

SyntheticDataset gen_synthetic(const SyntheticTaskSpec& spec) {
  spec.validate();
  SeededRng geometry(derive_seed(spec.seed, kGeometryStream));
  SeededRng noise(derive_seed(spec.seed, kNoiseStream));
  SyntheticDataset out;
  for (int i = 0; i < spec.train_per_class; ++i)
    for (int c = 0; c < spec.classes; ++c) out.train.push_back(make_sample(spec, c, geometry, noise));
  for (int i = 0; i < spec.test_per_class; ++i)
    for (int c = 0; c < spec.classes; ++c) out.test.push_back(make_sample(spec, c, geometry, noise));
  return out;
}

std::vector<Sample> samples_of(const std::vector<SyntheticSample>& items) {
  std::vector<Sample> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.sample);
  return out;
}

}  // namespace partnet
