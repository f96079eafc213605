#include "partnet/parts.hpp"

#include <algorithm>
#include <numeric>

#include "partnet/errors.hpp"

namespace partnet {

PartExtraction extract_parts(const PartNetModel& model, const FeatureMap& map, int top_m) {
  PreparedSample prepared;
  const HeadForward fwd = partnet_forward(model, map, &prepared);
  const Tensor& det = fwd.scores.det_reduced;
  const std::size_t proposals = det.cols();
  if (top_m < 1 || static_cast<std::size_t>(top_m) > proposals) {
    throw ConfigError("extract_parts: M=" + std::to_string(top_m) + " must be in [1, R=" + std::to_string(proposals) +
                      "]");
  }
  PartExtraction out;
  out.stride = map.stride();
  for (std::size_t p = 0; p < det.rows(); ++p) {
    std::vector<std::size_t> order(proposals);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return det(p, a) > det(p, b); });
    DetectorParts d;
    d.detector = static_cast<int>(p);
    for (int k = 0; k < top_m; ++k) {
      const std::size_t r = order[static_cast<std::size_t>(k)];
      d.top.push_back({r, prepared.proposals[r], det(p, r)});
    }
    d.best = d.top.front();
    out.detectors.push_back(std::move(d));
  }
  return out;
}

nlohmann::json extraction_json(const PartExtraction& extraction, const std::string& source, int label) {
  nlohmann::json detectors = nlohmann::json::array();
  for (const auto& d : extraction.detectors) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& s : d.top) {
      nlohmann::json item = proposal_json(s.proposal, extraction.stride);
      item["index"] = s.index;
      item["score"] = s.score;
      top.push_back(std::move(item));
    }
    nlohmann::json best = proposal_json(d.best.proposal, extraction.stride);
    best["index"] = d.best.index;
    best["score"] = d.best.score;
    detectors.push_back({{"detector", d.detector}, {"best", best}, {"top", top}});
  }
  return {{"source", source}, {"label", label}, {"stride", extraction.stride}, {"detectors", detectors}};
}

Tensor ensemble_predict(std::span<const Tensor> models) {
  if (models.empty()) throw UsageError("ensemble_predict: no models");
  Tensor out(models.front().shape());
  for (const auto& m : models) {
    if (!m.same_shape(out) || m.rank() != 1) {
      throw DimensionError("ensemble_predict: probability vector " + m.shape_string() + " vs " + out.shape_string());
    }
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += m[c];
  }
  for (double& v : out.values()) v /= static_cast<double>(models.size());
  return out;
}

PartModelSet fine_tune_part_models(const ImageModel& image_model, const std::vector<Sample>& data,
                                   const std::vector<PartExtraction>& extractions, int top_m, const RunConfig& config) {
  if (extractions.empty() || extractions.size() != data.size()) {
    throw DataError("fine_tune_part_models: need one extraction per sample (got " + std::to_string(extractions.size()) +
                    " for " + std::to_string(data.size()) + " samples)");
  }
  const TrainConfig& tc = config.train;
  const std::size_t detectors = extractions.front().detectors.size();
  if (detectors == 0) throw DataError("fine_tune_part_models: empty extraction set");
  PartModelSet out;
  for (std::size_t p = 0; p < detectors; ++p) {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& det = extractions[i].detectors.at(p);
      const std::size_t take = std::min(det.top.size(), static_cast<std::size_t>(top_m));
      for (std::size_t k = 0; k < take; ++k) {
        inputs.push_back(crop_average_pool(data[i].map, det.top[k].proposal.box, tc.part_grid));
        labels.push_back(data[i].label);
      }
    }
    if (inputs.empty()) throw DataError("fine_tune_part_models: empty extraction set");
    ClassifierTrainOptions opt;
    opt.epochs = tc.part_epochs;
    opt.batch = tc.batch;
    opt.base = {tc.lr_pretrained, tc.lr_new};
    opt.momentum = tc.momentum;
    opt.lambda = tc.lambda;
    opt.group = ParamGroup::kPretrained;
    opt.seed = derive_seed(tc.seed, 100 + p);
    out.training_sizes.push_back(inputs.size());
    out.models.push_back(train_classifier(image_model, inputs, labels, opt));
  }
  return out;
}

Tensor part_model_predict(const ImageModel& part_model, const FeatureMap& map, const PartExtraction& extraction,
                          int detector, int grid) {
  const auto& det = extraction.detectors.at(static_cast<std::size_t>(detector));
  return part_model.predict(crop_average_pool(map, det.best.proposal.box, grid));
}

}  // namespace partnet
