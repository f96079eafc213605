#pragma once

#include <span>
#include <string>
#include <vector>

#include "partnet/params.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

struct LossConfig {
  double lambda = 1e-4;
  double clamp = 1e-12;  // y is clamped to [clamp, 1 - clamp] before logs
};

struct LossResult {
  double loss = 0.0;  // data + reg
  double data = 0.0;
  double reg = 0.0;
  Tensor grad;  // d(data)/d(input); the L2 part is applied by sgd_step
};

Tensor one_hot(int label, std::size_t classes);

// (lambda/2) * sum of squared decay-marked parameters.
double l2_penalty(std::span<const ParamRef> params, double lambda);

// Binary cross entropy over the C entries of y against a one-hot target,
// plus the L2 term. y is used directly as probabilities.
LossResult bce_loss(const Tensor& y, const Tensor& target, std::span<const ParamRef> params, const LossConfig& config);

// Softmax cross entropy on raw logits; used by the image-level classifier.
LossResult softmax_cross_entropy(const Tensor& logits, int label, std::span<const ParamRef> params,
                                 const LossConfig& config);

struct LearningRates {
  double pretrained = 1e-3;
  double fresh = 1e-1;

  double for_group(ParamGroup g) const { return g == ParamGroup::kPretrained ? pretrained : fresh; }
  friend bool operator==(const LearningRates&, const LearningRates&) = default;
};

inline constexpr int kDefaultMilestoneValues[] = {80, 120};
inline constexpr std::span<const int> kDefaultMilestones{kDefaultMilestoneValues};

// Step decay: every group is multiplied by `factor` once the epoch reaches
// each milestone.
LearningRates lr_schedule(int epoch, const LearningRates& base, std::span<const int> milestones = kDefaultMilestones,
                          double factor = 0.1);

struct OptimState {
  std::vector<Tensor> velocity;
  double momentum = 0.9;
  LearningRates lr;
  int epoch = 0;

  static OptimState for_params(std::span<const ParamRef> params, double momentum);
};

// v <- mu * v - lr * (grad + lambda * param); param <- param + v.
// lambda applies only to decay-marked parameters.
void sgd_step(std::span<const ParamRef> params, std::span<const Tensor> grads, OptimState& state, double lambda);

struct SvbConfig {
  double epsilon = 0.05;
  int period = 1;  // epochs between projections
  std::vector<std::string> targets{"cls_fc2.weight"};
};

// Applies svb_project to every parameter named in config.targets; returns the
// number of matrices projected.
int apply_svb(std::span<const ParamRef> params, const SvbConfig& config);

}  // namespace partnet
