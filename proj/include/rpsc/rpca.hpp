#pragma once

#include "rpsc/panel.hpp"

#include <cstddef>
#include <functional>
#include <optional>

namespace rpsc {

/// Elementwise sign(x) * max(|x| - tau, 0); the proximal map of tau * ||.||_1.
Matrix soft_threshold(const Matrix& x, double tau);

/// U * soft_threshold(Sigma, tau) * V^T; the proximal map of tau * ||.||_*.
Matrix singular_value_threshold(const Matrix& x, double tau);

/// Same as above, also reporting how many singular values survived.
Matrix singular_value_threshold(const Matrix& x, double tau, std::size_t& rank);

double nuclear_norm(const Matrix& x);

struct RpcaConfig {
  double lambda = 0.0;  // weight of ||S||_1
  double mu = 0.0;      // augmented Lagrangian penalty
  double tol = 0.0;     // stop once ||Y - L - S||_F <= tol on observed entries
  std::size_t max_iter = 1000;
  // Start the dual at zero instead of Y / max(||Y||_2, ||Y||_inf / lambda).
  bool zero_dual_init = false;
};

/// lambda = 1/sqrt(max(rows, cols)), tol = 1e-7 ||Y||_F,
/// mu = n_obs / (4 sum |Y_ij|) with sums over observed entries.
RpcaConfig default_hyperparams(const Matrix& y, const Mask* mask = nullptr);

struct RpcaResult {
  Matrix low_rank;
  Matrix sparse;
  Matrix dual;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Snapshot handed to an observer after every ADMM iteration.
struct RpcaIterate {
  std::size_t iteration;
  const Matrix& low_rank;
  const Matrix& sparse;
  const Matrix& dual;
  const Matrix& low_rank_argument;  // input of the singular value threshold
  const Matrix& sparse_argument;    // input of the soft threshold
  std::size_t rank;
  double residual;
};

using RpcaObserver = std::function<void(const RpcaIterate&)>;

/// ADMM for min ||L||_* + lambda ||S||_1 s.t. Y = L + S:
///   L <- D_{1/mu}(Y - S - Lambda/mu)
///   S <- S_{lambda/mu}(Y - L - Lambda/mu)
///   Lambda <- Lambda + mu (L + S - Y)
/// Masked-out entries of Y are treated as 0 and left unconstrained: S there
/// is not thresholded, so S = -L and the dual stays at zero.
RpcaResult rpca_admm(const Matrix& y, const RpcaConfig& cfg, const Mask* mask = nullptr,
                     const RpcaObserver& observer = {});

struct SpectrumReport {
  Vector singular_values;  // descending
  Vector cumulative;       // cumulative sigma_k^2 / sum sigma^2
};

SpectrumReport spectrum_report(const Matrix& y);

}  // namespace rpsc
