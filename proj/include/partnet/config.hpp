#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace partnet {

struct SyntheticTaskSpec {
  int classes = 10;
  int channels = 32;
  int width = 28;
  int height = 28;
  int stride = 16;
  int patch = 5;            // odd side of the planted patch
  int signal_channels = 3;  // per class, disjoint across classes
  double noise = 0.1;       // std-dev of the Gaussian background
  double amplitude = 1.0;   // patch peak value
  double distractor = 0.0;  // decoy peak relative to the patch peak; 0 disables decoys
  int train_per_class = 20;
  int test_per_class = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class TrainMode { kPartNet, kDegenerate };

struct TrainConfig {
  int classes = 10;
  int parts = 3;
  int cells = 4;
  int anchors = 28;
  int pool = 7;
  int hidden = 256;
  double lambda = 1e-4;
  double momentum = 0.9;
  double lr_pretrained = 1e-3;
  double lr_new = 1e-1;
  int epochs = 160;
  std::vector<int> milestones{80, 120};
  int batch = 32;
  bool flip = true;
  bool svb = false;
  double svb_epsilon = 0.05;
  int svb_period = 1;
  TrainMode mode = TrainMode::kPartNet;
  int top_m = 50;
  int part_grid = 2;  // coarse enough that bin maxima keep the peak of a small part
  int image_epochs = 30;
  int part_epochs = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

// Line-oriented key=value file; '#' starts a comment. The same keys feed both
// the synthetic task and the training run (`classes` and `seed` are shared).
struct RunConfig {
  SyntheticTaskSpec task;
  TrainConfig train;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  // Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  void validate() const;
};

std::string mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& text);

}  // namespace partnet
