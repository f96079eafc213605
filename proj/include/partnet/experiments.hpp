#pragma once

#include <string>
#include <vector>

#include "partnet/config.hpp"
#include "partnet/parts.hpp"
#include "partnet/synthetic.hpp"
#include "partnet/trainer.hpp"

namespace partnet {

// Copy of `base` with data and training both reseeded.
RunConfig with_seed(const RunConfig& base, std::uint64_t seed);

// Trains PartNet on the synthetic train split of `config` and scores the test split.
double synthetic_partnet_accuracy(const RunConfig& config);
double synthetic_image_accuracy(const RunConfig& config);

struct AblationRow {
  std::string setting;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

enum class AblationMode { kDegenerate, kPSweep, kKSweep, kSvb };
AblationMode parse_ablation_mode(const std::string& text);

/**
 * Runs one ablation on the synthetic task for every seed.
 *   degenerate: settings partnet, degenerate, image
 *   p-sweep:    P=1, P=3, P=5, P=10
 *   k-sweep:    K=3, K=7, K=14, K=28
 *   svb:        svb-off, svb-on
 */
std::vector<AblationRow> run_ablation(AblationMode mode, const RunConfig& base, const std::vector<std::uint64_t>& seeds);

struct SettingSummary {
  std::string setting;
  double mean = 0.0;
  std::size_t runs = 0;
};
// Mean accuracy per setting, in first-appearance order.
std::vector<SettingSummary> summarize(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Noiseless copy of the task with fresh geometry, for localization checks.
SyntheticTaskSpec noiseless_probe(const SyntheticTaskSpec& task);

// Fraction of samples whose top-1 box of detector p has IoU > threshold with
// the planted patch, per detector.
std::vector<double> localization_rates(const PartNetModel& model, const std::vector<SyntheticSample>& samples,
                                       double threshold = 0.3);

}  // namespace partnet
