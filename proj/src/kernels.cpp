#include "partnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partnet/errors.hpp"

namespace partnet {
namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(name) + " must be a matrix, got " + t.shape_string());
  }
}

void require_cache(const Tensor& t, const char* kernel) {
  if (t.empty()) throw UsageError(std::string(kernel) + ": missing forward cache");
}

void require_same(const Tensor& a, const Tensor& b, const char* kernel) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(kernel) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

[[noreturn]] void inner_mismatch(const char* kernel, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(kernel) + ": cannot multiply " + a.shape_string() + " by " +
                       b.shape_string());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) inner_mismatch("matmul", a, b);
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  Tensor out({p, r});
  // i-k-j order: each out(i, j) accumulates over k in ascending order.
  for (std::size_t i = 0; i < p; ++i) {
    double* out_row = out.values().data() + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = a(i, k);
      const double* b_row = b.values().data() + k * r;
      for (std::size_t j = 0; j < r; ++j) out_row[j] += aik * b_row[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  if (a.cols() != b.cols()) inner_mismatch("matmul_nt", a, b);
  const std::size_t p = a.rows(), q = a.cols(), r = b.rows();
  Tensor out({p, r});
  for (std::size_t i = 0; i < p; ++i) {
    const double* a_row = a.values().data() + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double* b_row = b.values().data() + j * q;
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  require_finite(out, "matmul_nt");
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn lhs");
  require_matrix(b, "matmul_tn rhs");
  if (a.rows() != b.rows()) inner_mismatch("matmul_tn", a, b);
  const std::size_t q = a.rows(), p = a.cols(), r = b.cols();
  Tensor out({p, r});
  for (std::size_t k = 0; k < q; ++k) {
    const double* b_row = b.values().data() + k * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* out_row = out.values().data() + i * r;
      for (std::size_t j = 0; j < r; ++j) out_row[j] += aki * b_row[j];
    }
  }
  require_finite(out, "matmul_tn");
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  require_finite(x, "softmax_rows input");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto dst = out.row(i);
    const double peak = *std::max_element(in.begin(), in.end());
    double norm = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(in[j] - peak);
      norm += dst[j];
    }
    for (double& v : dst) v /= norm;
  }
  return out;
}

Tensor softmax_cols(const Tensor& x) {
  require_matrix(x, "softmax_cols");
  require_finite(x, "softmax_cols input");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(x.shape());
  for (std::size_t j = 0; j < cols; ++j) {
    double peak = x(0, j);
    for (std::size_t i = 1; i < rows; ++i) peak = std::max(peak, x(i, j));
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      out(i, j) = std::exp(x(i, j) - peak);
      norm += out(i, j);
    }
    for (std::size_t i = 0; i < rows; ++i) out(i, j) /= norm;
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "fc_forward input");
  require_matrix(weight, "fc_forward weight");
  if (bias.rank() != 1 || bias.size() != weight.rows()) {
    throw DimensionError("fc_forward: bias " + bias.shape_string() + " does not match weight " +
                         weight.shape_string());
  }
  Tensor out = matmul(weight, x);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v += bias[i];
  return out;
}

MatmulGrad matmul_grad(const Tensor& a, const Tensor& b, const Tensor& upstream) {
  require_cache(a, "matmul_grad");
  require_cache(b, "matmul_grad");
  require_matrix(upstream, "matmul_grad upstream");
  if (upstream.rows() != a.rows() || upstream.cols() != b.cols()) {
    throw DimensionError("matmul_grad: upstream " + upstream.shape_string() + " for product of " +
                         a.shape_string() + " and " + b.shape_string());
  }
  return {matmul_nt(upstream, b), matmul_tn(a, upstream)};
}

Tensor softmax_rows_grad(const Tensor& output, const Tensor& upstream) {
  require_cache(output, "softmax_rows_grad");
  require_same(output, upstream, "softmax_rows_grad");
  Tensor out(output.shape());
  for (std::size_t i = 0; i < output.rows(); ++i) {
    auto s = output.row(i);
    auto g = upstream.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) dot += s[j] * g[j];
    auto dst = out.row(i);
    for (std::size_t j = 0; j < s.size(); ++j) dst[j] = s[j] * (g[j] - dot);
  }
  return out;
}

Tensor softmax_cols_grad(const Tensor& output, const Tensor& upstream) {
  require_cache(output, "softmax_cols_grad");
  require_same(output, upstream, "softmax_cols_grad");
  const std::size_t rows = output.rows(), cols = output.cols();
  Tensor out(output.shape());
  for (std::size_t j = 0; j < cols; ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < rows; ++i) dot += output(i, j) * upstream(i, j);
    for (std::size_t i = 0; i < rows; ++i) out(i, j) = output(i, j) * (upstream(i, j) - dot);
  }
  return out;
}

Tensor relu_grad(const Tensor& pre, const Tensor& upstream) {
  require_cache(pre, "relu_grad");
  require_same(pre, upstream, "relu_grad");
  Tensor out = upstream;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (!(pre[k] > 0.0)) out[k] = 0.0;
  return out;
}

FcGrad fc_grad(const Tensor& x, const Tensor& weight, const Tensor& upstream, bool need_input_grad) {
  require_cache(x, "fc_grad");
  require_matrix(upstream, "fc_grad upstream");
  if (upstream.rows() != weight.rows() || upstream.cols() != x.cols() || weight.cols() != x.rows()) {
    throw DimensionError("fc_grad: upstream " + upstream.shape_string() + ", weight " +
                         weight.shape_string() + ", input " + x.shape_string());
  }
  FcGrad g;
  g.weight = matmul_nt(upstream, x);
  g.bias = Tensor({weight.rows()});
  for (std::size_t i = 0; i < upstream.rows(); ++i) {
    double acc = 0.0;
    for (double v : upstream.row(i)) acc += v;
    g.bias[i] = acc;
  }
  if (need_input_grad) g.input = matmul_tn(weight, upstream);
  return g;
}

}  // namespace partnet
