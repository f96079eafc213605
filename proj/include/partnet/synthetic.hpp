#pragma once

#include <vector>

#include "partnet/config.hpp"
#include "partnet/dpp.hpp"
#include "partnet/feature_map.hpp"

namespace partnet {

/**
 * Desk-scale surrogate task. Every sample carries a tent-shaped patch on all
 * signal channels of its own class, shifted to zero mean over its square and
 * scaled so the center equals `amplitude`. Channel means therefore carry no
 * class signal and a global-average classifier sits at chance, while a max
 * over a window on the patch still sees the peak.
 *
 * With distractor > 0 every signal channel of every other class gets its own
 * faint zero-mean patch at an independent random center, peak
 * distractor * amplitude. Besides acting as decoys they keep idle channels
 * from all voting for position (0, 0) in the peak histogram when the noise is
 * off. Gaussian background noise is added on all channels.
 */
struct SyntheticSample {
  Sample sample;
  Box patch;      // planted patch in feature-map coordinates
  GridPos center;
};

struct SyntheticDataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
};

SyntheticDataset gen_synthetic(const SyntheticTaskSpec& spec);

// Channels [c * signal_channels, (c + 1) * signal_channels).
int first_signal_channel(const SyntheticTaskSpec& spec, int label);

std::vector<Sample> samples_of(const std::vector<SyntheticSample>& items);

}  // namespace partnet
