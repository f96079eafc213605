#include "partnet/image_model.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "partnet/errors.hpp"
#include "partnet/kernels.hpp"
#include "partnet/roi_pool.hpp"

namespace partnet {
namespace {

Tensor as_column(const Tensor& v) { return Tensor({v.size(), 1}, std::vector<double>(v.values().begin(), v.values().end())); }

std::size_t argmax(const Tensor& v) {
  return static_cast<std::size_t>(std::max_element(v.values().begin(), v.values().end()) - v.values().begin());
}

}  // namespace

ImageModel ImageModel::initialize(std::size_t channels, std::size_t classes, SeededRng& rng) {
  return {Linear::initialize(channels, classes, rng)};
}

Tensor ImageModel::logits(const Tensor& pooled) const {
  if (pooled.size() != fc.inputs()) {
    throw DimensionError("image model expects " + std::to_string(fc.inputs()) + " channels, got " +
                         std::to_string(pooled.size()));
  }
  const Tensor out = fc_forward(as_column(pooled), fc.weight, fc.bias);
  return Tensor({out.rows()}, std::vector<double>(out.values().begin(), out.values().end()));
}

Tensor ImageModel::predict(const Tensor& pooled) const {
  const Tensor z = logits(pooled);
  const Tensor p = softmax_rows(Tensor({1, z.size()}, std::vector<double>(z.values().begin(), z.values().end())));
  return Tensor({z.size()}, std::vector<double>(p.values().begin(), p.values().end()));
}

std::vector<ParamRef> ImageModel::parameters(ParamGroup group) {
  return {{"fc.weight", &fc.weight, true, group}, {"fc.bias", &fc.bias, false, group}};
}

Tensor global_average_pool(const FeatureMap& map) {
  Tensor out({static_cast<std::size_t>(map.channels())});
  for (int n = 0; n < map.channels(); ++n) {
    const auto plane = map.channel(n);
    out[static_cast<std::size_t>(n)] = std::accumulate(plane.begin(), plane.end(), 0.0) / static_cast<double>(plane.size());
  }
  return out;
}

Tensor crop_average_pool(const FeatureMap& map, const Box& box, int grid) {
  const RoiFeature roi = roi_max_pool(map, box, grid);
  const std::size_t bins = static_cast<std::size_t>(grid) * grid;
  Tensor out({static_cast<std::size_t>(map.channels())});
  for (std::size_t n = 0; n < out.size(); ++n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < bins; ++k) acc += roi.values[n * bins + k];
    out[n] = acc / static_cast<double>(bins);
  }
  return out;
}

ImageModel train_classifier(ImageModel model, const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                            const ClassifierTrainOptions& options, std::string* log) {
  if (inputs.size() != labels.size()) throw DimensionError("train_classifier: inputs and labels differ in length");
  if (inputs.empty()) throw DataError("train_classifier: empty training set");
  auto params = model.parameters(options.group);
  OptimState state = OptimState::for_params(params, options.momentum);
  SeededRng shuffle_rng(derive_seed(options.seed, 31));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  const LossConfig loss_cfg{options.lambda};
  int step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    state.epoch = epoch;
    state.lr = lr_schedule(epoch, options.base, options.milestones);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      Tensor gw(model.fc.weight.shape()), gb(model.fc.bias.shape());
      double data_loss = 0.0;
      int correct = 0;
      for (std::size_t i = start; i < end; ++i) {
        const Tensor& x = inputs[order[i]];
        const Tensor z = model.logits(x);
        if (static_cast<int>(argmax(z)) == labels[order[i]]) ++correct;
        const LossResult loss = softmax_cross_entropy(z, labels[order[i]], {}, loss_cfg);
        data_loss += loss.data;
        for (std::size_t c = 0; c < z.size(); ++c) {
          gb[c] += loss.grad[c];
          for (std::size_t n = 0; n < x.size(); ++n) gw(c, n) += loss.grad[c] * x[n];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : gw.values()) v *= inv;
      for (double& v : gb.values()) v *= inv;
      const std::vector<Tensor> grads{std::move(gw), std::move(gb)};
      sgd_step(params, grads, state, options.lambda);
      if (log) {
        char row[256];
        std::snprintf(row, sizeof(row), "%d,%d,%.10g,%.10g,%.10g,%.10g,0\n", epoch, step,
                      data_loss * inv + l2_penalty(params, options.lambda), correct * inv, state.lr.pretrained,
                      state.lr.fresh);
        *log += row;
      }
      ++step;
    }
  }
  return model;
}

Checkpoint image_model_checkpoint(const ImageModel& model, const std::string& kind, const std::string& config) {
  return {kind, config, {{"fc.weight", model.fc.weight}, {"fc.bias", model.fc.bias}}};
}

ImageModel image_model_from_checkpoint(const Checkpoint& ckpt) {
  ImageModel m{{ckpt.blob("fc.weight"), ckpt.blob("fc.bias")}};
  if (m.fc.weight.rank() != 2 || m.fc.bias.size() != m.fc.weight.rows()) {
    throw FormatError("image model checkpoint has inconsistent fc shapes");
  }
  return m;
}

}  // namespace partnet
