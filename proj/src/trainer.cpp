#include "partnet/trainer.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>
#include <optional>

#include "partnet/errors.hpp"
#include "partnet/roi_pool.hpp"
#include "partnet/training.hpp"

namespace partnet {
namespace {

constexpr std::uint64_t kInitStream = 21;
constexpr std::uint64_t kShuffleStream = 22;
constexpr std::uint64_t kFlipStream = 23;
constexpr std::uint64_t kImageStream = 24;
// Pooled features are cached across epochs below this many bytes.
constexpr std::size_t kFeatureCacheBudget = std::size_t{512} << 20;

void check_samples(const std::vector<Sample>& data, int classes) {
  if (data.empty()) throw DataError("no samples");
  const FeatureMap& first = data.front().map;
  for (const auto& s : data) {
    if (s.label < 0 || s.label >= classes) {
      throw DataError("sample " + s.source + " has label " + std::to_string(s.label) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    if (s.map.channels() != first.channels()) {
      throw DataError("sample " + s.source + " has " + std::to_string(s.map.channels()) + " channels, expected " +
                      std::to_string(first.channels()));
    }
  }
}

void append_row(std::string& log, int epoch, int step, double loss, double accuracy, const LearningRates& lr, int svb) {
  char row[256];
  std::snprintf(row, sizeof(row), "%d,%d,%.10g,%.10g,%.10g,%.10g,%d\n", epoch, step, loss, accuracy, lr.pretrained,
                lr.fresh, svb);
  log += row;
}

std::size_t argmax(const Tensor& v) {
  return static_cast<std::size_t>(std::max_element(v.values().begin(), v.values().end()) - v.values().begin());
}

}  // namespace

HeadMode PartNetModel::mode() const {
  return config.train.mode == TrainMode::kDegenerate ? HeadMode::kDegenerate : HeadMode::kPartNet;
}

AnchorSpec PartNetModel::anchors() const {
  return subsample_proposals(AnchorSpec::table_default(), config.train.anchors);
}

Checkpoint partnet_checkpoint(const PartNetModel& model) {
  Checkpoint ckpt{"partnet", model.config.to_text(), {}};
  auto head = model.head;
  for (const auto& p : head.parameters()) ckpt.blobs.push_back({p.name, *p.value});
  return ckpt;
}

PartNetModel partnet_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "partnet") throw FormatError("expected a partnet checkpoint, got kind '" + ckpt.kind + "'");
  PartNetModel model;
  model.config = RunConfig::parse(ckpt.config);
  for (auto& p : model.head.parameters()) *p.value = ckpt.blob(p.name);
  const HeadShape s = model.head.shape();
  if (s.classes != static_cast<std::size_t>(model.config.train.classes) ||
      s.parts != static_cast<std::size_t>(model.config.train.parts) ||
      model.head.det_fc1.inputs() != s.feature_dim || model.head.cls_fc2.inputs() != s.hidden) {
    throw FormatError("partnet checkpoint parameters disagree with its config");
  }
  return model;
}

PreparedSample prepare_sample(const FeatureMap& map, const TrainConfig& config, const AnchorSpec& anchors) {
  PreparedSample out;
  out.proposals = discretized_part_proposals(map, config.cells, anchors);
  out.features = pool_proposals(map, out.proposals, config.pool);
  return out;
}

HeadForward partnet_forward(const PartNetModel& model, const FeatureMap& map, PreparedSample* prepared) {
  PreparedSample local = prepare_sample(map, model.config.train, model.anchors());
  const std::size_t dim = local.features.rows();
  if (dim != model.head.shape().feature_dim) {
    throw DataError("feature map gives RoI features of size " + std::to_string(dim) + ", model expects " +
                    std::to_string(model.head.shape().feature_dim));
  }
  HeadForward f = head_forward(local.features, model.head, model.mode());
  if (prepared) *prepared = std::move(local);
  return f;
}

Tensor partnet_predict(const PartNetModel& model, const FeatureMap& map) { return partnet_forward(model, map).scores.y; }

TrainOutcome train_partnet(const std::vector<Sample>& data, const RunConfig& config) {
  config.train.validate();
  const TrainConfig& tc = config.train;
  check_samples(data, tc.classes);

  TrainOutcome out;
  out.model.config = config;
  const AnchorSpec anchors = out.model.anchors();
  const HeadMode mode = out.model.mode();
  const std::size_t channels = static_cast<std::size_t>(data.front().map.channels());
  const HeadShape shape{channels * tc.pool * tc.pool, static_cast<std::size_t>(tc.hidden),
                        static_cast<std::size_t>(tc.classes), static_cast<std::size_t>(tc.parts)};

  SeededRng init_rng(derive_seed(tc.seed, kInitStream));
  SeededRng shuffle_rng(derive_seed(tc.seed, kShuffleStream));
  SeededRng flip_rng(derive_seed(tc.seed, kFlipStream));
  HeadParams& head = out.model.head;
  head = HeadParams::initialize(shape, init_rng);
  const auto params = head.parameters(ParamGroup::kNew);
  OptimState state = OptimState::for_params(params, tc.momentum);
  const LearningRates base{tc.lr_pretrained, tc.lr_new};
  const LossConfig loss_cfg{tc.lambda};
  SvbConfig svb_cfg;
  svb_cfg.epsilon = tc.svb_epsilon;
  svb_cfg.period = tc.svb_period;

  // Per-sample pooled features, [sample][flipped].
  const std::size_t per_sample = shape.feature_dim * static_cast<std::size_t>(tc.cells * tc.cells) * anchors.count() * 8;
  const bool use_cache = per_sample * data.size() * (tc.flip ? 2 : 1) <= kFeatureCacheBudget;
  std::vector<std::array<std::optional<Tensor>, 2>> cache(use_cache ? data.size() : 0);
  auto features_for = [&](std::size_t idx, bool flipped) -> Tensor {
    if (use_cache && cache[idx][flipped]) return *cache[idx][flipped];
    const FeatureMap& src = data[idx].map;
    Tensor f = flipped ? prepare_sample(flip_horizontal(src), tc, anchors).features
                       : prepare_sample(src, tc, anchors).features;
    if (use_cache) cache[idx][flipped] = f;
    return f;
  };

  out.log = kTrainLogHeader;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    state.epoch = epoch;
    state.lr = lr_schedule(epoch, base, tc.milestones);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const std::size_t batch = static_cast<std::size_t>(tc.batch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      HeadParams grad_sum = HeadParams::zeros(shape);
      auto grad_refs = grad_sum.parameters();
      double data_loss = 0.0;
      int correct = 0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const bool flipped = tc.flip && flip_rng.uniform() < 0.5;
        const Tensor features = features_for(idx, flipped);
        const HeadForward fwd = head_forward(features, head, mode);
        if (static_cast<int>(argmax(fwd.scores.y)) == data[idx].label) ++correct;
        const LossResult loss = bce_loss(fwd.scores.y, one_hot(data[idx].label, shape.classes), {}, loss_cfg);
        data_loss += loss.data;
        HeadGradients g = head_backward(loss.grad, fwd, head, features);
        const auto sample_refs = g.params.parameters();
        for (std::size_t k = 0; k < grad_refs.size(); ++k) {
          Tensor& acc = *grad_refs[k].value;
          const Tensor& add = *sample_refs[k].value;
          for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += add[e];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      std::vector<Tensor> grads;
      grads.reserve(grad_refs.size());
      for (auto& r : grad_refs) {
        for (double& v : r.value->values()) v *= inv;
        grads.push_back(std::move(*r.value));
      }
      sgd_step(params, grads, state, tc.lambda);
      int svb_applied = 0;
      const bool last_of_epoch = end == order.size();
      if (tc.svb && last_of_epoch && (epoch + 1) % tc.svb_period == 0) svb_applied = apply_svb(params, svb_cfg);
      append_row(out.log, epoch, step, data_loss * inv + l2_penalty(params, tc.lambda), correct * inv, state.lr,
                 svb_applied);
      ++step;
    }
  }
  out.log_checksum = fnv1a64(out.log);
  return out;
}

EvalReport score_predictions(std::vector<Tensor> probabilities, const std::vector<int>& labels, std::size_t classes) {
  if (probabilities.size() != labels.size()) throw DimensionError("score_predictions: length mismatch");
  EvalReport r;
  r.confusion.assign(classes, std::vector<int>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (probabilities[i].size() != classes) throw DimensionError("score_predictions: wrong probability length");
    const std::size_t pred = argmax(probabilities[i]);
    ++r.confusion.at(static_cast<std::size_t>(labels[i]))[pred];
    if (static_cast<int>(pred) == labels[i]) ++r.correct;
  }
  r.total = static_cast<int>(labels.size());
  r.accuracy = r.total ? static_cast<double>(r.correct) / r.total : 0.0;
  r.probabilities = std::move(probabilities);
  return r;
}

EvalReport evaluate(const PartNetModel& model, const std::vector<Sample>& data) {
  check_samples(data, model.config.train.classes);
  std::vector<Tensor> probs;
  probs.reserve(data.size());
  for (const auto& s : data) probs.push_back(partnet_predict(model, s.map));
  return score_predictions(std::move(probs), labels_of(data), static_cast<std::size_t>(model.config.train.classes));
}

ImageTrainOutcome train_image_model(const std::vector<Sample>& data, const RunConfig& config) {
  const TrainConfig& tc = config.train;
  check_samples(data, tc.classes);
  SeededRng rng(derive_seed(tc.seed, kImageStream));
  ImageModel model = ImageModel::initialize(static_cast<std::size_t>(data.front().map.channels()),
                                            static_cast<std::size_t>(tc.classes), rng);
  std::vector<Tensor> inputs;
  for (const auto& s : data) inputs.push_back(global_average_pool(s.map));
  ClassifierTrainOptions opt;
  opt.epochs = tc.image_epochs;
  opt.batch = tc.batch;
  opt.base = {tc.lr_pretrained, tc.lr_new};
  opt.momentum = tc.momentum;
  opt.lambda = tc.lambda;
  opt.group = ParamGroup::kNew;
  opt.seed = tc.seed;
  ImageTrainOutcome out;
  out.log = kTrainLogHeader;
  out.model = train_classifier(std::move(model), inputs, labels_of(data), opt, &out.log);
  return out;
}

EvalReport evaluate_image_model(const ImageModel& model, const std::vector<Sample>& data) {
  std::vector<Tensor> probs;
  for (const auto& s : data) probs.push_back(model.predict(global_average_pool(s.map)));
  return score_predictions(std::move(probs), labels_of(data), model.classes());
}

std::vector<int> labels_of(const std::vector<Sample>& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.label);
  return out;
}

}  // namespace partnet
