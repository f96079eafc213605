#pragma once

#include "partnet/tensor.hpp"

namespace partnet {

// Forward kernels. Every kernel rejects mismatched shapes with DimensionError
// and non-finite results with NumericError.

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T and a^T * b without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Log-sum-exp stabilized softmax over each row / each column.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_cols(const Tensor& x);

Tensor relu(const Tensor& x);

// W * x + b, with b broadcast across the R columns of x.
Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Backward kernels. Cached forward tensors are passed explicitly; an empty
// cache raises UsageError.

struct MatmulGrad {
  Tensor a;
  Tensor b;
};
MatmulGrad matmul_grad(const Tensor& a, const Tensor& b, const Tensor& upstream);

// Takes the softmax output (not its input).
Tensor softmax_rows_grad(const Tensor& output, const Tensor& upstream);
Tensor softmax_cols_grad(const Tensor& output, const Tensor& upstream);

// Takes the pre-activation.
Tensor relu_grad(const Tensor& pre, const Tensor& upstream);

struct FcGrad {
  Tensor weight;
  Tensor bias;
  Tensor input;  // empty unless requested
};
FcGrad fc_grad(const Tensor& x, const Tensor& weight, const Tensor& upstream, bool need_input_grad = true);

}  // namespace partnet
