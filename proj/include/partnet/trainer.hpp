#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partnet/checkpoint.hpp"
#include "partnet/config.hpp"
#include "partnet/dpp.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/head.hpp"
#include "partnet/image_model.hpp"

namespace partnet {

struct PartNetModel {
  RunConfig config;
  HeadParams head;

  HeadMode mode() const;
  AnchorSpec anchors() const;
};

Checkpoint partnet_checkpoint(const PartNetModel& model);
PartNetModel partnet_from_checkpoint(const Checkpoint& ckpt);

// DPP proposals and their pooled (N*m*m) x R feature matrix for one map.
struct PreparedSample {
  std::vector<Proposal> proposals;
  Tensor features;
};
PreparedSample prepare_sample(const FeatureMap& map, const TrainConfig& config, const AnchorSpec& anchors);

HeadForward partnet_forward(const PartNetModel& model, const FeatureMap& map, PreparedSample* prepared = nullptr);
Tensor partnet_predict(const PartNetModel& model, const FeatureMap& map);

inline constexpr const char* kTrainLogHeader = "epoch,step,loss,accuracy,lr_pretrained,lr_new,svb_applied\n";

struct TrainOutcome {
  PartNetModel model;
  std::string log;  // CSV including header
  std::uint64_t log_checksum = 0;
};

// DPP -> RoI pooling -> head -> BCE -> SGD per batch; periodic SVB when
// enabled. Fully determined by the samples and config (including seed).
TrainOutcome train_partnet(const std::vector<Sample>& data, const RunConfig& config);

struct EvalReport {
  int correct = 0;
  int total = 0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [truth][predicted]
  std::vector<Tensor> probabilities;
};

// Top-1 accuracy of argmax over each probability vector (ties: lowest class).
EvalReport score_predictions(std::vector<Tensor> probabilities, const std::vector<int>& labels, std::size_t classes);
EvalReport evaluate(const PartNetModel& model, const std::vector<Sample>& data);

// Image-level classifier on global-average-pooled maps.
struct ImageTrainOutcome {
  ImageModel model;
  std::string log;
};
ImageTrainOutcome train_image_model(const std::vector<Sample>& data, const RunConfig& config);
EvalReport evaluate_image_model(const ImageModel& model, const std::vector<Sample>& data);

std::vector<int> labels_of(const std::vector<Sample>& data);

}  // namespace partnet
