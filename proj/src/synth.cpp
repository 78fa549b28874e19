#include "rpsc/synth.hpp"

#include "rpsc/error.hpp"
#include "rpsc/nnls.hpp"
#include "rpsc/rmspe.hpp"

#include <algorithm>
#include <string>

namespace rpsc {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

Vector SynthFit::full_series() const {
  Vector out(fitted_pre.size() + counterfactual_post.size());
  out << fitted_pre, counterfactual_post;
  return out;
}

Vector fit_weights(const Vector& y_pre, const Matrix& l_pre) {
  if (l_pre.rows() < 1 || l_pre.cols() < 1) throw ValidationError("fit_weights: empty donor block");
  if (l_pre.cols() != y_pre.size()) throw ValidationError("fit_weights: series length mismatch");
  return nnls(l_pre.transpose(), y_pre).x;
}

Vector predict_counterfactual(const Matrix& l_post, const Vector& beta) {
  if (l_post.rows() != beta.size()) {
    throw ValidationError("predict_counterfactual: " + std::to_string(l_post.rows()) +
                          " donor rows but " + std::to_string(beta.size()) + " weights");
  }
  return l_post.transpose() * beta;
}

RpcaConfig resolve_rpca_config(const Matrix& y, const Mask& mask, const RpcaOverrides& overrides) {
  RpcaConfig cfg;
  const bool need_defaults = !(overrides.lambda && overrides.mu && overrides.tol);
  if (need_defaults) cfg = default_hyperparams(y, &mask);
  if (overrides.lambda) cfg.lambda = *overrides.lambda;
  if (overrides.mu) cfg.mu = *overrides.mu;
  if (overrides.tol) cfg.tol = *overrides.tol;
  if (overrides.max_iter) cfg.max_iter = *overrides.max_iter;
  cfg.zero_dual_init = overrides.zero_dual_init;
  return cfg;
}

PipelineResult run_pipeline(const Panel& panel, const PipelineConfig& config) {
  stage("panel", [&] { require_valid(panel); return 0; });
  const std::size_t treated = *panel.treated;
  const auto t0 = static_cast<Eigen::Index>(*panel.t0);
  const auto T = static_cast<Eigen::Index>(panel.periods());

  PipelineResult out;
  ResolvedConfig& used = out.fit.config_used;
  used.requested = config;

  // Step 1: FPCA of every unit's pre-intervention curve.
  const auto curves = pre_period_curves(panel);
  out.fpca = stage("FPCA", [&] { return run_fpca(curves, config.smoothing); });
  used.grid_size = static_cast<std::size_t>(out.fpca.grid.size());
  used.bandwidth_mean = out.fpca.bandwidth_mean;
  used.bandwidth_cov = out.fpca.bandwidth_cov;
  used.num_scores = stage("FPCA", [&] {
    return select_num_scores(out.fpca.eigenvalues, config.score_threshold);
  });
  const Matrix points = out.fpca.scores.leftCols(static_cast<Eigen::Index>(used.num_scores));

  // Step 2: donor pool from the treated unit's cluster.
  const std::size_t distinct = count_distinct_rows(points);
  used.k_min = config.k_min;
  used.k_max = std::min(config.k_max, distinct > 0 ? distinct - 1 : 0);
  stage("clustering", [&] {
    if (used.k_min >= 2 && used.k_max >= used.k_min) {
      out.tuning = tune_k(points, used.k_min, used.k_max, config.restarts, config.seed);
      out.clustering = out.tuning.best;
    } else {
      out.clustering = kmeans(points, 1, 1, config.seed);
      out.tuning.selected_k = 1;
      out.tuning.best = out.clustering;
    }
    used.k = out.clustering.k;
    out.fit.donor_indices = donor_pool(out.clustering, treated);
    return 0;
  });
  const auto& donors = out.fit.donor_indices;
  const auto D = static_cast<Eigen::Index>(donors.size());

  // Step 3: low-rank structure of the donor block over the full horizon.
  Matrix y_donor(D, T);
  Mask m_donor(D, T);
  for (Eigen::Index r = 0; r < D; ++r) {
    y_donor.row(r) = panel.values.row(static_cast<Eigen::Index>(donors[static_cast<std::size_t>(r)]));
    m_donor.row(r) = panel.mask.row(static_cast<Eigen::Index>(donors[static_cast<std::size_t>(r)]));
  }
  used.rpca = stage("RPCA", [&] { return resolve_rpca_config(y_donor, m_donor, config.rpca); });
  out.rpca = stage("RPCA", [&] { return rpca_admm(y_donor, used.rpca, &m_donor); });

  // Steps 4-5: weights on the observed treated pre-period, then prediction.
  const auto tr = static_cast<Eigen::Index>(treated);
  std::vector<Eigen::Index> obs;
  for (Eigen::Index t = 0; t < t0; ++t) {
    if (panel.mask(tr, t)) obs.push_back(t);
  }
  const auto n_obs = static_cast<Eigen::Index>(obs.size());
  Vector y_pre(n_obs);
  Matrix l_fit(D, n_obs);
  for (Eigen::Index c = 0; c < n_obs; ++c) {
    y_pre(c) = panel.values(tr, obs[static_cast<std::size_t>(c)]);
    l_fit.col(c) = out.rpca.low_rank.col(obs[static_cast<std::size_t>(c)]);
  }
  out.fit.beta = stage("weights", [&] { return fit_weights(y_pre, l_fit); });
  out.fit.fitted_pre = out.rpca.low_rank.leftCols(t0).transpose() * out.fit.beta;
  out.fit.counterfactual_post = predict_counterfactual(out.rpca.low_rank.rightCols(T - t0), out.fit.beta);

  const Vector actual_pre = panel.values.row(tr).head(t0).transpose();
  const Eigen::Array<bool, Eigen::Dynamic, 1> observed_pre = panel.mask.row(tr).head(t0).transpose();
  out.fit.pre_rmspe = rmspe(actual_pre, out.fit.fitted_pre, 0, static_cast<std::size_t>(t0), &observed_pre);
  return out;
}

}  // namespace rpsc
