#include "partnet/training.hpp"

#include <algorithm>
#include <cmath>

#include "partnet/errors.hpp"
#include "partnet/svd.hpp"

namespace partnet {

Tensor one_hot(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  }
  Tensor t({classes});
  t[static_cast<std::size_t>(label)] = 1.0;
  return t;
}

double l2_penalty(std::span<const ParamRef> params, double lambda) {
  double acc = 0.0;
  for (const auto& p : params)
    if (p.decay) acc += p.value->squared_norm();
  return 0.5 * lambda * acc;
}

LossResult bce_loss(const Tensor& y, const Tensor& target, std::span<const ParamRef> params, const LossConfig& config) {
  if (!y.same_shape(target) || y.rank() != 1) {
    throw DimensionError("bce_loss: y " + y.shape_string() + " vs target " + target.shape_string());
  }
  if (config.lambda < 0.0) throw ConfigError("bce_loss: lambda must be >= 0");
  int ones = 0;
  for (double g : target.values()) {
    if (g == 1.0) {
      ++ones;
    } else if (g != 0.0) {
      throw DataError("bce_loss: target is not one-hot");
    }
  }
  if (ones != 1) throw DataError("bce_loss: target is not one-hot");

  LossResult r;
  r.grad = Tensor(y.shape());
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double p = std::clamp(y[j], config.clamp, 1.0 - config.clamp);
    const double g = target[j];
    r.data -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    r.grad[j] = -g / p + (1.0 - g) / (1.0 - p);
  }
  r.reg = l2_penalty(params, config.lambda);
  r.loss = r.data + r.reg;
  return r;
}

LossResult softmax_cross_entropy(const Tensor& logits, int label, std::span<const ParamRef> params,
                                 const LossConfig& config) {
  const Tensor target = one_hot(label, logits.size());
  const double peak = *std::max_element(logits.values().begin(), logits.values().end());
  double norm = 0.0;
  for (double v : logits.values()) norm += std::exp(v - peak);
  const double log_norm = peak + std::log(norm);
  LossResult r;
  r.grad = Tensor(logits.shape());
  for (std::size_t j = 0; j < logits.size(); ++j) r.grad[j] = std::exp(logits[j] - log_norm) - target[j];
  r.data = log_norm - logits[static_cast<std::size_t>(label)];
  r.reg = l2_penalty(params, config.lambda);
  r.loss = r.data + r.reg;
  return r;
}

LearningRates lr_schedule(int epoch, const LearningRates& base, std::span<const int> milestones, double factor) {
  LearningRates lr = base;
  for (int m : milestones) {
    if (epoch >= m) {
      lr.pretrained *= factor;
      lr.fresh *= factor;
    }
  }
  return lr;
}

OptimState OptimState::for_params(std::span<const ParamRef> params, double momentum) {
  OptimState s;
  s.momentum = momentum;
  for (const auto& p : params) s.velocity.emplace_back(p.value->shape());
  return s;
}

void sgd_step(std::span<const ParamRef> params, std::span<const Tensor> grads, OptimState& state, double lambda) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.velocity.size()) +
                         " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].value;
    const Tensor& g = grads[i];
    Tensor& v = state.velocity[i];
    if (!w.same_shape(g) || !w.same_shape(v)) {
      throw DimensionError("sgd_step: " + params[i].name + " is " + w.shape_string() + ", gradient " +
                           g.shape_string() + ", velocity " + v.shape_string());
    }
    const double lr = state.lr.for_group(params[i].group);
    const double decay = params[i].decay ? lambda : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = state.momentum * v[k] - lr * (g[k] + decay * w[k]);
      w[k] += v[k];
    }
  }
}

int apply_svb(std::span<const ParamRef> params, const SvbConfig& config) {
  if (!(config.epsilon > 0.0)) throw ConfigError("svb: epsilon must be > 0");
  if (config.period < 1) throw ConfigError("svb: period must be >= 1");
  int applied = 0;
  for (const auto& p : params) {
    if (std::find(config.targets.begin(), config.targets.end(), p.name) == config.targets.end()) continue;
    *p.value = svb_project(*p.value, config.epsilon);
    ++applied;
  }
  return applied;
}

}  // namespace partnet
