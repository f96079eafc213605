#pragma once

#include <vector>

#include "partnet/params.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

struct HeadShape {
  std::size_t feature_dim = 0;  // N * m * m
  std::size_t hidden = 256;
  std::size_t classes = 0;  // C, background row added internally
  std::size_t parts = 3;    // P, background detector added internally
};

/**
 * The two parallel FC streams.
 *
 * cls_fc2 has C+1 output rows (row C is the background category) and det_fc2
 * has P+1 rows (row P is the background detector).
 */
struct HeadParams {
  Linear cls_fc1;
  Linear cls_fc2;
  Linear det_fc1;
  Linear det_fc2;

  static HeadParams initialize(const HeadShape& shape, SeededRng& rng);
  static HeadParams zeros(const HeadShape& shape);

  HeadShape shape() const;
  std::size_t classes() const { return cls_fc2.outputs() - 1; }
  std::size_t parts() const { return det_fc2.outputs() - 1; }

  std::vector<ParamRef> parameters(ParamGroup group = ParamGroup::kNew);
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

// Score matrices of one image with R proposals.
struct ScoreMatrices {
  Tensor cls;          // (C+1) x R, column-stochastic (category softmax)
  Tensor det_part;     // (P+1) x R, column-stochastic (part softmax)
  Tensor det;          // (P+1) x R, row-stochastic (proposal softmax)
  Tensor cls_reduced;  // C x R
  Tensor det_reduced;  // P x R
  Tensor y;            // C
};

struct StreamCache {
  Tensor pre;     // fc1 output before ReLU
  Tensor hidden;  // after ReLU
  Tensor logits;  // fc2 output
};

enum class HeadMode { kPartNet, kDegenerate };

struct HeadForward {
  HeadMode mode = HeadMode::kPartNet;
  StreamCache cls;
  StreamCache det;  // empty in degenerate mode
  ScoreMatrices scores;
};

struct DetectionScores {
  Tensor part;      // S~_det
  Tensor proposal;  // S_det
};

// features: (N*m*m) x R, one column per RoI.
Tensor classification_stream(const Tensor& features, const HeadParams& params);
DetectionScores detection_stream(const Tensor& features, const HeadParams& params);

// y = (1/P) S'_cls S'_det^T 1_P, where the primes drop each matrix's last row.
Tensor aggregate(const Tensor& s_cls, const Tensor& s_det);
// Same product on already-reduced matrices.
Tensor aggregate_reduced(const Tensor& cls_reduced, const Tensor& det_reduced);

// Uniform 1/R detection scores in place of the detection stream.
Tensor degenerate_forward(const Tensor& features, const HeadParams& params);

HeadForward head_forward(const Tensor& features, const HeadParams& params, HeadMode mode = HeadMode::kPartNet);

struct HeadGradients {
  HeadParams params;
  Tensor features;  // empty unless requested
};

HeadGradients head_backward(const Tensor& dy, const HeadForward& forward, const HeadParams& params,
                            const Tensor& features, bool need_feature_grad = false);

}  // namespace partnet
