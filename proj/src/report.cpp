#include "rpsc/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace rpsc {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string time_key(double t) { return format_number(t); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
  return arr;
}

Json to_json(const RpcaConfig& cfg) {
  return Json{{"lambda", cfg.lambda},
              {"mu", cfg.mu},
              {"tol", cfg.tol},
              {"max_iter", cfg.max_iter},
              {"zero_dual_init", cfg.zero_dual_init}};
}

Json to_json(const ResolvedConfig& cfg) {
  const auto& req = cfg.requested;
  return Json{
      {"kernel", req.smoothing.kernel == Kernel::Epanechnikov ? "epanechnikov" : "gaussian"},
      {"grid_size", cfg.grid_size},
      {"bandwidth_mean", cfg.bandwidth_mean},
      {"bandwidth_cov", cfg.bandwidth_cov},
      {"score_threshold", req.score_threshold},
      {"num_scores", cfg.num_scores},
      {"k_min", cfg.k_min},
      {"k_max", cfg.k_max},
      {"k", cfg.k},
      {"restarts", req.restarts},
      {"seed", req.seed},
      {"rpca", to_json(cfg.rpca)},
  };
}

void write_fpca_csv(std::ostream& out, const FpcaResult& fpca) {
  out << "grid,mean";
  for (Eigen::Index k = 0; k < fpca.eigenfunctions.rows(); ++k) out << ",phi_" << k + 1;
  out << '\n';
  for (Eigen::Index g = 0; g < fpca.grid.size(); ++g) {
    out << format_number(fpca.grid(g)) << ',' << format_number(fpca.mean(g));
    for (Eigen::Index k = 0; k < fpca.eigenfunctions.rows(); ++k) {
      out << ',' << format_number(fpca.eigenfunctions(k, g));
    }
    out << '\n';
  }
}

void write_scree_csv(std::ostream& out, const FpcaResult& fpca) {
  out << "component,eigenvalue,explained,cumulative\n";
  const double total = fpca.eigenvalues.sum();
  for (Eigen::Index k = 0; k < fpca.eigenvalues.size(); ++k) {
    out << k + 1 << ',' << format_number(fpca.eigenvalues(k)) << ','
        << format_number(fpca.eigenvalues(k) / total) << ',' << format_number(fpca.explained(k))
        << '\n';
  }
}

void write_scores_csv(std::ostream& out, const Panel& panel, const FpcaResult& fpca) {
  out << "unit";
  for (Eigen::Index k = 0; k < fpca.scores.cols(); ++k) out << ",score_" << k + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < fpca.scores.rows(); ++i) {
    out << csv_text(panel.unit_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < fpca.scores.cols(); ++k) out << ',' << format_number(fpca.scores(i, k));
    out << '\n';
  }
}

Json fpca_summary(const FpcaResult& fpca) {
  return Json{{"grid_size", fpca.grid.size()},
              {"bandwidth_mean", fpca.bandwidth_mean},
              {"bandwidth_cov", fpca.bandwidth_cov},
              {"eigenvalues", to_json(fpca.eigenvalues)},
              {"explained", to_json(fpca.explained)}};
}

void write_tune_csv(std::ostream& out, const TuneResult& tuning) {
  out << "k,wss,silhouette\n";
  for (const auto& row : tuning.table) {
    out << row.k << ',' << format_number(row.wss) << ',' << format_number(row.silhouette) << '\n';
  }
}

void write_spectrum_csv(std::ostream& out, const SpectrumReport& spectrum) {
  out << "index,singular_value,cumulative\n";
  for (Eigen::Index k = 0; k < spectrum.singular_values.size(); ++k) {
    out << k + 1 << ',' << format_number(spectrum.singular_values(k)) << ','
        << format_number(spectrum.cumulative(k)) << '\n';
  }
}

Json rpca_summary(const RpcaResult& rpca) {
  Eigen::Index nonzero = 0;
  for (Eigen::Index i = 0; i < rpca.sparse.size(); ++i) nonzero += rpca.sparse.data()[i] != 0.0;
  return Json{{"iterations", rpca.iterations},
              {"residual", rpca.residual},
              {"converged", rpca.converged},
              {"sparse_nonzeros", nonzero}};
}

void write_series_csv(std::ostream& out, const Panel& panel, const SynthFit& fit) {
  const auto tr = static_cast<Eigen::Index>(*panel.treated);
  const Vector synthetic = fit.full_series();
  out << "time,actual,counterfactual,gap\n";
  for (Eigen::Index t = 0; t < synthetic.size(); ++t) {
    const bool seen = panel.mask(tr, t);
    const double actual = panel.values(tr, t);
    out << format_number(panel.time_labels[static_cast<std::size_t>(t)]) << ','
        << (seen ? format_number(actual) : "") << ',' << format_number(synthetic(t)) << ','
        << (seen ? format_number(actual - synthetic(t)) : "") << '\n';
  }
}

Json fit_summary(const Panel& panel, const PipelineResult& result) {
  const auto& fit = result.fit;
  const auto t0 = *panel.t0;
  Json weights = Json::object();
  Json donors = Json::array();
  for (std::size_t j = 0; j < fit.donor_indices.size(); ++j) {
    const auto& label = panel.unit_labels[fit.donor_indices[j]];
    donors.push_back(label);
    weights[label] = fit.beta(static_cast<Eigen::Index>(j));
  }
  Json fitted = Json::object();
  for (std::size_t t = 0; t < t0; ++t) {
    fitted[time_key(panel.time_labels[t])] = number(fit.fitted_pre(static_cast<Eigen::Index>(t)));
  }
  Json counterfactual = Json::object();
  for (std::size_t t = t0; t < panel.periods(); ++t) {
    counterfactual[time_key(panel.time_labels[t])] =
        number(fit.counterfactual_post(static_cast<Eigen::Index>(t - t0)));
  }
  Json clusters = Json::array();
  for (std::size_t l = 0; l < result.clustering.k; ++l) {
    Json members = Json::array();
    for (std::size_t i = 0; i < result.clustering.assignment.size(); ++i) {
      if (result.clustering.assignment[i] == l) members.push_back(panel.unit_labels[i]);
    }
    clusters.push_back(std::move(members));
  }
  return Json{{"treated", panel.unit_labels[*panel.treated]},
              {"intervention", panel.time_labels[t0 - 1]},
              {"config", to_json(fit.config_used)},
              {"fpca", fpca_summary(result.fpca)},
              {"clusters", std::move(clusters)},
              {"donors", std::move(donors)},
              {"weights", std::move(weights)},
              {"pre_rmspe", fit.pre_rmspe},
              {"rpca", rpca_summary(result.rpca)},
              {"fitted_pre", std::move(fitted)},
              {"counterfactual_post", std::move(counterfactual)}};
}

void write_ratios_csv(std::ostream& out, const EvalReport& report) {
  out << "unit,pre_rmspe,post_rmspe,ratio\n";
  for (const auto& u : report.units) {
    if (u.error) continue;
    out << csv_text(u.label) << ',' << format_number(u.pre_rmspe) << ','
        << format_number(u.post_rmspe) << ',' << format_number(u.ratio) << '\n';
  }
}

void write_loo_csv(std::ostream& out, const Panel& panel, const std::vector<LooRun>& runs) {
  out << "dropped_unit,time,counterfactual\n";
  for (const auto& r : runs) {
    if (r.error) continue;
    for (Eigen::Index t = 0; t < r.synthetic.size(); ++t) {
      out << csv_text(r.label) << ',' << format_number(panel.time_labels[static_cast<std::size_t>(t)])
          << ',' << format_number(r.synthetic(t)) << '\n';
    }
  }
}

Json eval_summary(const Panel& panel, const EvalReport& report) {
  Json units = Json::array();
  for (const auto& u : report.units) {
    Json j{{"unit", u.label}, {"treated", u.is_treated}};
    if (u.error) {
      j["error"] = *u.error;
    } else {
      j["pre_rmspe"] = number(u.pre_rmspe);
      j["post_rmspe"] = number(u.post_rmspe);
      j["ratio"] = number(u.ratio);
    }
    units.push_back(std::move(j));
  }
  return Json{{"treated", panel.unit_labels[*panel.treated]},
              {"pipeline_runs", report.pipeline_runs},
              {"treated_ratio_is_max", report.treated_ratio_is_max()},
              {"units", std::move(units)}};
}

Json loo_summary(const Panel& panel, const std::vector<LooRun>& runs) {
  Json out = Json::array();
  const auto t0 = *panel.t0;
  for (const auto& r : runs) {
    Json j{{"dropped", r.label}};
    if (r.error) {
      j["error"] = *r.error;
    } else {
      Json series = Json::object();
      for (Eigen::Index t = 0; t < r.counterfactual.size(); ++t) {
        series[time_key(panel.time_labels[t0 + static_cast<std::size_t>(t)])] = number(r.counterfactual(t));
      }
      j["counterfactual_post"] = std::move(series);
    }
    out.push_back(std::move(j));
  }
  return out;
}

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  out << "sigma2,variant,pre_rmspe,post_rmspe,clustering_accuracy\n";
  for (const auto& r : rows) {
    out << format_number(r.sigma2) << ',' << r.variant << ',' << format_number(r.pre_rmspe) << ','
        << format_number(r.post_rmspe) << ',' << format_number(r.clustering_accuracy) << '\n';
  }
}

void write_sim_series_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  out << "sigma2,variant,time,truth,estimate\n";
  for (const auto& r : rows) {
    for (Eigen::Index t = 0; t < r.truth.size(); ++t) {
      out << format_number(r.sigma2) << ',' << r.variant << ','
          << format_number(r.time_labels[static_cast<std::size_t>(t)]) << ',' << format_number(r.truth(t))
          << ',' << format_number(r.estimate(t)) << '\n';
    }
  }
}

Json study_summary(const std::vector<StudyRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back(Json{{"sigma2", r.sigma2},
                       {"variant", r.variant},
                       {"pre_rmspe", r.pre_rmspe},
                       {"post_rmspe", r.post_rmspe},
                       {"clustering_accuracy", r.clustering_accuracy},
                       {"first_fpc_explained", r.first_fpc_explained},
                       {"k", r.k},
                       {"donors", r.donors}});
  }
  return out;
}

}  // namespace rpsc
