#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "partnet/dpp.hpp"
#include "partnet/image_model.hpp"
#include "partnet/trainer.hpp"

namespace partnet {

struct ScoredProposal {
  std::size_t index = 0;  // position in the DPP proposal list
  Proposal proposal;
  double score = 0.0;  // S'_det entry
};

struct DetectorParts {
  int detector = 0;
  std::vector<ScoredProposal> top;  // descending score, ties by lower index
  ScoredProposal best;
};

struct PartExtraction {
  int stride = 1;
  std::vector<DetectorParts> detectors;
};

// Ranks the R proposals by each row of S'_det. M > R is a ConfigError.
PartExtraction extract_parts(const PartNetModel& model, const FeatureMap& map, int top_m);

nlohmann::json extraction_json(const PartExtraction& extraction, const std::string& source, int label);

// Arithmetic mean of equally long probability vectors.
Tensor ensemble_predict(std::span<const Tensor> models);

struct PartModelSet {
  std::vector<ImageModel> models;  // one per detector
  std::vector<std::size_t> training_sizes;
};

// For detector p, every sample contributes its top-M proposals, each cropped
// and pooled to the classifier grid; a copy of the image-level model is then
// fine-tuned on them with the sample's label.
PartModelSet fine_tune_part_models(const ImageModel& image_model, const std::vector<Sample>& data,
                                   const std::vector<PartExtraction>& extractions, int top_m, const RunConfig& config);

// Probabilities of part model p on the top-1 box of detector p.
Tensor part_model_predict(const ImageModel& part_model, const FeatureMap& map, const PartExtraction& extraction,
                          int detector, int grid);

}  // namespace partnet
