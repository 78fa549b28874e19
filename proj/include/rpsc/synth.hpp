#pragma once

#include "rpsc/cluster.hpp"
#include "rpsc/fpca.hpp"
#include "rpsc/panel.hpp"
#include "rpsc/rpca.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace rpsc {

struct RpcaOverrides {
  std::optional<double> lambda;
  std::optional<double> mu;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  bool zero_dual_init = false;
};

struct PipelineConfig {
  SmoothingConfig smoothing;
  double score_threshold = 0.95;
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::size_t restarts = 50;
  std::uint64_t seed = 0;
  RpcaOverrides rpca;
};

/// Everything the pipeline actually used after defaults were resolved.
struct ResolvedConfig {
  PipelineConfig requested;
  std::size_t grid_size = 0;
  double bandwidth_mean = 0.0;
  double bandwidth_cov = 0.0;
  std::size_t num_scores = 0;
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  std::size_t k = 0;
  RpcaConfig rpca;
};

struct SynthFit {
  std::vector<std::size_t> donor_indices;
  Vector beta;                 // one non-negative weight per donor
  Vector fitted_pre;           // length t0
  Vector counterfactual_post;  // length T - t0
  double pre_rmspe = 0.0;
  ResolvedConfig config_used;

  /// fitted_pre followed by counterfactual_post.
  Vector full_series() const;
};

struct PipelineResult {
  SynthFit fit;
  FpcaResult fpca;
  TuneResult tuning;  // empty table when the k range collapsed to one cluster
  Clustering clustering;
  RpcaResult rpca;
};

/// Non-negative least squares fit of the treated pre-period series on the
/// donors' low-rank pre-period rows (D x t0), no intercept.
Vector fit_weights(const Vector& y_pre, const Matrix& l_pre);

/// Counterfactual L_post^T beta for a D x (T - t0) low-rank block.
Vector predict_counterfactual(const Matrix& l_post, const Vector& beta);

/// FPCA on every unit's pre-period, score count by explained variance,
/// silhouette-tuned K-means, donor pool = treated unit's cluster, robust PCA
/// of the donor rows over the full horizon, weights on the pre-period and
/// counterfactual on the post-period.
///
/// The upper end of the k range is capped at (distinct score points - 1);
/// when that leaves no valid k, all other units form the donor pool.
PipelineResult run_pipeline(const Panel& panel, const PipelineConfig& config);

/// The resolved RPCA configuration for a donor block: defaults from the data,
/// then any overrides.
RpcaConfig resolve_rpca_config(const Matrix& y, const Mask& mask, const RpcaOverrides& overrides);

}  // namespace rpsc
