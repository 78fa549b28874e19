#pragma once

#include "rpsc/panel.hpp"

#include <cstddef>

namespace rpsc {

struct NnlsResult {
  Vector x;
  std::size_t iterations = 0;
  double kkt_tol = 0.0;  // 1e-8 * ||A^T b||_inf
};

/// min ||A x - b||_2 subject to x >= 0, Lawson-Hanson active set.
/// On return, for every j: x_j > 0 and |g_j| <= kkt_tol, or x_j == 0 and
/// g_j >= -kkt_tol, where g = A^T (A x - b).
NnlsResult nnls(const Matrix& a, const Vector& b);

/// Largest KKT violation of `x` for the problem above.
double kkt_violation(const Matrix& a, const Vector& b, const Vector& x);

}  // namespace rpsc
