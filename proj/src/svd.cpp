#include "partnet/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "partnet/errors.hpp"
#include "partnet/kernels.hpp"

namespace partnet {
namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOrthTol = 1e-15;

double column_dot(const Tensor& m, std::size_t p, std::size_t q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) acc += m(i, p) * m(i, q);
  return acc;
}

void rotate_columns(Tensor& m, std::size_t p, std::size_t q, double c, double s) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double mp = m(i, p), mq = m(i, q);
    m(i, p) = c * mp - s * mq;
    m(i, q) = s * mp + c * mq;
  }
}

// Replaces column j of u (assumed zero) with a unit vector orthogonal to the
// columns in `done`.
void complete_column(Tensor& u, std::size_t j, const std::vector<std::size_t>& done) {
  for (std::size_t e = 0; e < u.rows(); ++e) {
    std::vector<double> cand(u.rows(), 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k : done) {
        double dot = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i) dot += cand[i] * u(i, k);
        for (std::size_t i = 0; i < u.rows(); ++i) cand[i] -= dot * u(i, k);
      }
    }
    double norm = 0.0;
    for (double v : cand) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 1e-6) {
      for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = cand[i] / norm;
      return;
    }
  }
  throw NumericError("jacobi_svd: could not complete orthonormal basis");
}

// Tall case: rows >= cols.
Svd jacobi_tall(const Tensor& a) {
  const std::size_t n = a.cols();
  Tensor u = a;
  Tensor v = Tensor::identity(n);
  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = column_dot(u, p, p);
        const double beta = column_dot(u, q, q);
        const double gamma = column_dot(u, p, q);
        if (gamma == 0.0 || std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(u, p, q, c, s);
        rotate_columns(v, p, q, c, s);
      }
    }
  }
  if (!converged) throw NumericError("jacobi_svd: no convergence after " + std::to_string(kMaxSweeps) + " sweeps");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(column_dot(u, j, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Tensor({a.rows(), n}), std::vector<double>(n), Tensor({n, n})};
  const double cutoff = (n ? sigma[order[0]] : 0.0) * 1e-13;
  std::vector<std::size_t> done;
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    if (sigma[j] > cutoff && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < a.rows(); ++i) out.u(i, k) = u(i, j) / sigma[j];
      done.push_back(k);
    } else {
      out.singular[k] = 0.0;
      missing.push_back(k);
    }
  }
  for (std::size_t k : missing) {
    complete_column(out.u, k, done);
    done.push_back(k);
  }
  return out;
}

}  // namespace

Svd jacobi_svd(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("jacobi_svd: expected a matrix, got " + a.shape_string());
  if (!a.all_finite()) throw NumericError("jacobi_svd: non-finite input");
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  Svd t = jacobi_tall(transpose(a));
  return {std::move(t.v), std::move(t.singular), std::move(t.u)};
}

Tensor reconstruct(const Svd& svd, const std::vector<double>& singular) {
  Tensor scaled = svd.u;
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (std::size_t k = 0; k < scaled.cols(); ++k) scaled(i, k) *= singular[k];
  return matmul_nt(scaled, svd.v);
}

Tensor svb_project(const Tensor& weight, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("svb_project: epsilon must be positive");
  const Svd svd = jacobi_svd(weight);
  const double lo = 1.0 / (1.0 + epsilon), hi = 1.0 + epsilon;
  std::vector<double> bounded = svd.singular;
  for (double& s : bounded) s = std::clamp(s, lo, hi);
  return reconstruct(svd, bounded);
}

}  // namespace partnet
