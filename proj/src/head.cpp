#include "partnet/head.hpp"

#include <cmath>
#include <string>

#include "partnet/errors.hpp"
#include "partnet/kernels.hpp"

namespace partnet {
namespace {

void check_features(const Tensor& features, const HeadParams& params) {
  if (features.rank() != 2) throw DimensionError("head: features must be a matrix, got " + features.shape_string());
  if (features.cols() == 0) throw DimensionError("head: need at least one proposal");
  if (features.rows() != params.cls_fc1.inputs() || features.rows() != params.det_fc1.inputs()) {
    throw DimensionError("head: feature dimension " + std::to_string(features.rows()) +
                         " does not match fc1 input width " + std::to_string(params.cls_fc1.inputs()));
  }
}

StreamCache run_stream(const Tensor& features, const Linear& fc1, const Linear& fc2) {
  StreamCache c;
  c.pre = fc_forward(features, fc1.weight, fc1.bias);
  c.hidden = relu(c.pre);
  c.logits = fc_forward(c.hidden, fc2.weight, fc2.bias);
  return c;
}

Tensor drop_last_row(const Tensor& m) {
  const std::size_t rows = m.rows() - 1, cols = m.cols();
  return Tensor({rows, cols}, std::vector<double>(m.values().begin(), m.values().begin() + rows * cols));
}

Tensor uniform_detection(std::size_t parts, std::size_t proposals) {
  return Tensor({parts, proposals}, 1.0 / static_cast<double>(proposals));
}

void stream_backward(const Tensor& features, const StreamCache& cache, const Linear& fc1, const Linear& fc2,
                     const Tensor& dlogits, Linear& g1, Linear& g2, Tensor* dfeatures) {
  FcGrad second = fc_grad(cache.hidden, fc2.weight, dlogits, true);
  const Tensor dpre = relu_grad(cache.pre, second.input);
  FcGrad first = fc_grad(features, fc1.weight, dpre, dfeatures != nullptr);
  g2 = {std::move(second.weight), std::move(second.bias)};
  g1 = {std::move(first.weight), std::move(first.bias)};
  if (dfeatures) {
    if (dfeatures->empty()) {
      *dfeatures = std::move(first.input);
    } else {
      for (std::size_t k = 0; k < dfeatures->size(); ++k) (*dfeatures)[k] += first.input[k];
    }
  }
}

}  // namespace

Linear Linear::initialize(std::size_t in, std::size_t out, SeededRng& rng) {
  Linear l = zeros(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : l.weight.values()) w = rng.uniform(-bound, bound);
  return l;
}

Linear Linear::zeros(std::size_t in, std::size_t out) { return {Tensor({out, in}), Tensor({out})}; }

HeadParams HeadParams::initialize(const HeadShape& s, SeededRng& rng) {
  if (s.feature_dim == 0 || s.hidden == 0 || s.classes == 0 || s.parts == 0) {
    throw ConfigError("head shape needs positive feature_dim, hidden, classes and parts");
  }
  HeadParams p;
  p.cls_fc1 = Linear::initialize(s.feature_dim, s.hidden, rng);
  p.cls_fc2 = Linear::initialize(s.hidden, s.classes + 1, rng);
  p.det_fc1 = Linear::initialize(s.feature_dim, s.hidden, rng);
  p.det_fc2 = Linear::initialize(s.hidden, s.parts + 1, rng);
  return p;
}

HeadParams HeadParams::zeros(const HeadShape& s) {
  return {Linear::zeros(s.feature_dim, s.hidden), Linear::zeros(s.hidden, s.classes + 1),
          Linear::zeros(s.feature_dim, s.hidden), Linear::zeros(s.hidden, s.parts + 1)};
}

HeadShape HeadParams::shape() const { return {cls_fc1.inputs(), cls_fc1.outputs(), classes(), parts()}; }

std::vector<ParamRef> HeadParams::parameters(ParamGroup group) {
  return {{"cls_fc1.weight", &cls_fc1.weight, true, group}, {"cls_fc1.bias", &cls_fc1.bias, false, group},
          {"cls_fc2.weight", &cls_fc2.weight, true, group}, {"cls_fc2.bias", &cls_fc2.bias, false, group},
          {"det_fc1.weight", &det_fc1.weight, true, group}, {"det_fc1.bias", &det_fc1.bias, false, group},
          {"det_fc2.weight", &det_fc2.weight, true, group}, {"det_fc2.bias", &det_fc2.bias, false, group}};
}

Tensor classification_stream(const Tensor& features, const HeadParams& params) {
  check_features(features, params);
  return softmax_cols(run_stream(features, params.cls_fc1, params.cls_fc2).logits);
}

DetectionScores detection_stream(const Tensor& features, const HeadParams& params) {
  check_features(features, params);
  Tensor part = softmax_cols(run_stream(features, params.det_fc1, params.det_fc2).logits);
  Tensor proposal = softmax_rows(part);
  return {std::move(part), std::move(proposal)};
}

Tensor aggregate_reduced(const Tensor& cls_reduced, const Tensor& det_reduced) {
  if (cls_reduced.cols() != det_reduced.cols()) {
    throw DimensionError("aggregate: S'_cls " + cls_reduced.shape_string() + " and S'_det " +
                         det_reduced.shape_string() + " disagree on R");
  }
  if (det_reduced.rows() == 0) throw DimensionError("aggregate: P must be >= 1");
  const Tensor part_scores = matmul_nt(cls_reduced, det_reduced);  // C x P
  const double inv_parts = 1.0 / static_cast<double>(det_reduced.rows());
  Tensor y({cls_reduced.rows()});
  for (std::size_t c = 0; c < part_scores.rows(); ++c) {
    double acc = 0.0;
    for (double v : part_scores.row(c)) acc += v;
    y[c] = acc * inv_parts;
  }
  return y;
}

Tensor aggregate(const Tensor& s_cls, const Tensor& s_det) {
  if (s_cls.rank() != 2 || s_det.rank() != 2 || s_cls.rows() < 2 || s_det.rows() < 2) {
    throw DimensionError("aggregate: need (C+1) x R and (P+1) x R matrices, got " + s_cls.shape_string() + " and " +
                         s_det.shape_string());
  }
  return aggregate_reduced(drop_last_row(s_cls), drop_last_row(s_det));
}

Tensor degenerate_forward(const Tensor& features, const HeadParams& params) {
  const Tensor s_cls = classification_stream(features, params);
  return aggregate_reduced(drop_last_row(s_cls), uniform_detection(params.parts(), features.cols()));
}

HeadForward head_forward(const Tensor& features, const HeadParams& params, HeadMode mode) {
  check_features(features, params);
  HeadForward f;
  f.mode = mode;
  f.cls = run_stream(features, params.cls_fc1, params.cls_fc2);
  f.scores.cls = softmax_cols(f.cls.logits);
  f.scores.cls_reduced = drop_last_row(f.scores.cls);
  if (mode == HeadMode::kPartNet) {
    f.det = run_stream(features, params.det_fc1, params.det_fc2);
    f.scores.det_part = softmax_cols(f.det.logits);
    f.scores.det = softmax_rows(f.scores.det_part);
    f.scores.det_reduced = drop_last_row(f.scores.det);
  } else {
    f.scores.det_reduced = uniform_detection(params.parts(), features.cols());
  }
  f.scores.y = aggregate_reduced(f.scores.cls_reduced, f.scores.det_reduced);
  return f;
}

HeadGradients head_backward(const Tensor& dy, const HeadForward& forward, const HeadParams& params,
                            const Tensor& features, bool need_feature_grad) {
  const ScoreMatrices& s = forward.scores;
  if (s.cls.empty() || forward.cls.pre.empty() || s.y.empty()) throw UsageError("head_backward: missing forward cache");
  if (forward.mode == HeadMode::kPartNet && (s.det.empty() || forward.det.pre.empty())) {
    throw UsageError("head_backward: missing detection-stream cache");
  }
  if (dy.rank() != 1 || dy.size() != s.y.size()) {
    throw DimensionError("head_backward: dL/dy " + dy.shape_string() + " does not match y " + s.y.shape_string());
  }
  const std::size_t classes = s.cls_reduced.rows(), parts = s.det_reduced.rows(), proposals = s.cls.cols();
  const double inv_parts = 1.0 / static_cast<double>(parts);

  // y_c = (1/P) sum_r S'_cls[c,r] w_r with w_r = sum_p S'_det[p,r].
  std::vector<double> weight(proposals, 0.0);
  for (std::size_t p = 0; p < parts; ++p)
    for (std::size_t r = 0; r < proposals; ++r) weight[r] += s.det_reduced(p, r);

  Tensor d_cls(s.cls.shape());  // background row stays zero
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t r = 0; r < proposals; ++r) d_cls(c, r) = dy[c] * weight[r] * inv_parts;

  HeadGradients g;
  g.params = HeadParams::zeros(params.shape());
  Tensor* dfeat = need_feature_grad ? &g.features : nullptr;

  stream_backward(features, forward.cls, params.cls_fc1, params.cls_fc2, softmax_cols_grad(s.cls, d_cls),
                  g.params.cls_fc1, g.params.cls_fc2, dfeat);

  if (forward.mode == HeadMode::kPartNet) {
    Tensor d_det(s.det.shape());
    for (std::size_t r = 0; r < proposals; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < classes; ++c) acc += dy[c] * s.cls_reduced(c, r);
      for (std::size_t p = 0; p < parts; ++p) d_det(p, r) = acc * inv_parts;
    }
    const Tensor d_part = softmax_rows_grad(s.det, d_det);
    stream_backward(features, forward.det, params.det_fc1, params.det_fc2, softmax_cols_grad(s.det_part, d_part),
                    g.params.det_fc1, g.params.det_fc2, dfeat);
  } else if (need_feature_grad && g.features.empty()) {
    g.features = Tensor(features.shape());
  }
  return g;
}

}  // namespace partnet
