#pragma once

#include <string>
#include <vector>

#include "partnet/rng.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

// Learning-rate group: parameters carried over from an already trained model
// versus freshly initialized ones.
enum class ParamGroup { kPretrained, kNew };

// Mutable view of one trainable tensor. `decay` marks tensors that enter the
// L2 term (weights only, never biases).
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  bool decay = false;
  ParamGroup group = ParamGroup::kNew;
};

struct Linear {
  Tensor weight;  // out x in
  Tensor bias;    // out

  // Weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases zero.
  static Linear initialize(std::size_t in, std::size_t out, SeededRng& rng);
  static Linear zeros(std::size_t in, std::size_t out);
  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }
  friend bool operator==(const Linear&, const Linear&) = default;
};

}  // namespace partnet
