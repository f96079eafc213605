#pragma once

#include <vector>

#include "partnet/tensor.hpp"

namespace partnet {

// Thin SVD a = u * diag(singular) * v^T with k = min(rows, cols):
// u is rows x k, v is cols x k, singular values descending.
struct Svd {
  Tensor u;
  std::vector<double> singular;
  Tensor v;
};

// One-sided (Hestenes) Jacobi. Columns of u belonging to zero singular values
// are completed to an orthonormal set. Throws NumericError on non-finite input
// or if the sweeps fail to converge.
Svd jacobi_svd(const Tensor& a);

Tensor reconstruct(const Svd& svd, const std::vector<double>& singular);

// Singular value bounding: clip every singular value into [1/(1+eps), 1+eps].
Tensor svb_project(const Tensor& weight, double epsilon);

}  // namespace partnet
