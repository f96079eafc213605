#pragma once

#include <string>
#include <vector>

#include "partnet/checkpoint.hpp"
#include "partnet/dpp.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/params.hpp"
#include "partnet/training.hpp"

namespace partnet {

// Global-average-pool + single FC classifier over N channels. The same type
// serves as the image-level model and, fine-tuned on cropped regions, as a
// part-level model.
struct ImageModel {
  Linear fc;  // C x N

  static ImageModel initialize(std::size_t channels, std::size_t classes, SeededRng& rng);

  Tensor logits(const Tensor& pooled) const;
  Tensor predict(const Tensor& pooled) const;  // softmax probabilities
  std::size_t classes() const { return fc.outputs(); }
  std::vector<ParamRef> parameters(ParamGroup group);
};

// Channel means over the whole map.
Tensor global_average_pool(const FeatureMap& map);
// RoI-max-pool the box to grid x grid, then average per channel; the
// desk-scale analog of zooming a part region to the classifier input size.
Tensor crop_average_pool(const FeatureMap& map, const Box& box, int grid);

struct ClassifierTrainOptions {
  int epochs = 30;
  int batch = 32;
  LearningRates base;
  std::vector<int> milestones;
  double momentum = 0.9;
  double lambda = 1e-4;
  ParamGroup group = ParamGroup::kNew;
  std::uint64_t seed = 1;
};

// Softmax cross-entropy training with SGD + momentum, batch-mean gradients.
// Appends CSV rows (epoch,step,loss,accuracy,lr_pretrained,lr_new,svb_applied)
// to `log` when given.
ImageModel train_classifier(ImageModel model, const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                            const ClassifierTrainOptions& options, std::string* log = nullptr);

Checkpoint image_model_checkpoint(const ImageModel& model, const std::string& kind, const std::string& config);
ImageModel image_model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace partnet
