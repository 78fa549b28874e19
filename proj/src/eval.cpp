#include "rpsc/eval.hpp"

#include "rpsc/error.hpp"
#include "rpsc/parallel.hpp"
#include "rpsc/rmspe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rpsc {

namespace {

UnitEvaluation evaluate(const Panel& panel, std::size_t unit, const SynthFit& fit) {
  const auto u = static_cast<Eigen::Index>(unit);
  const auto t0 = *panel.t0;
  const auto T = panel.periods();
  UnitEvaluation ev;
  ev.actual = panel.values.row(u).transpose();
  ev.synthetic = fit.full_series();
  const Eigen::Array<bool, Eigen::Dynamic, 1> observed = panel.mask.row(u).transpose();
  ev.pre_rmspe = rmspe(ev.actual, ev.synthetic, 0, t0, &observed);
  ev.post_rmspe = rmspe(ev.actual, ev.synthetic, t0, T, &observed);
  ev.ratio = ev.pre_rmspe > 0.0 ? ev.post_rmspe / ev.pre_rmspe
                                : std::numeric_limits<double>::infinity();
  return ev;
}

PipelineConfig with_seed(PipelineConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

}  // namespace

const UnitEvaluation* EvalReport::find(const std::string& label) const {
  for (const auto& u : units) {
    if (u.label == label) return &u;
  }
  return nullptr;
}

bool EvalReport::treated_ratio_is_max() const {
  const UnitEvaluation* treated = nullptr;
  for (const auto& u : units) {
    if (u.is_treated && !u.error) treated = &u;
  }
  if (!treated) return false;
  for (const auto& u : units) {
    if (&u != treated && !u.error && !(u.ratio < treated->ratio)) return false;
  }
  return true;
}

PlaceboInTime placebo_in_time(const Panel& panel, std::size_t fake_t0, const PipelineConfig& config) {
  require_valid(panel);
  const auto t0 = *panel.t0;
  if (fake_t0 >= t0) throw ValidationError("placebo_in_time: placebo intervention must precede the real one");
  if (fake_t0 < 2) throw ValidationError("placebo_in_time: need at least 2 pre-intervention periods");
  Panel shifted = truncate_periods(panel, t0);
  shifted.t0 = fake_t0;
  const auto rep = validate(shifted);
  if (!rep.ok) {
    std::string msg = "placebo_in_time: insufficient pre-period:";
    for (const auto& v : rep.violations) msg += " " + v + ";";
    throw ValidationError(msg);
  }
  return {run_pipeline(shifted, config), fake_t0, t0};
}

EvalReport placebo_in_space(const Panel& panel, const PipelineConfig& config, std::size_t jobs) {
  require_valid(panel);
  const std::size_t treated = *panel.treated;

  EvalReport report;
  const auto base = run_pipeline(panel, with_seed(config, config.seed + treated));
  const auto& donors = base.fit.donor_indices;
  if (donors.size() < 2) throw ValidationError("placebo_in_space: need at least 2 donors");

  auto real = evaluate(panel, treated, base.fit);
  real.unit = treated;
  real.label = panel.unit_labels[treated];
  real.is_treated = true;
  report.units.push_back(std::move(real));

  const Panel without_treated = remove_unit(panel, treated);
  std::vector<UnitEvaluation> placebo(donors.size());
  parallel_for(donors.size(), jobs, [&](std::size_t i) {
    const std::size_t unit = donors[i];
    auto& ev = placebo[i];
    try {
      Panel p = without_treated;
      p.treated = unit > treated ? unit - 1 : unit;
      const auto res = run_pipeline(p, with_seed(config, config.seed + unit));
      ev = evaluate(p, *p.treated, res.fit);
    } catch (const std::exception& e) {
      ev.error = e.what();
    }
    ev.unit = unit;
    ev.label = panel.unit_labels[unit];
  });
  for (auto& ev : placebo) report.units.push_back(std::move(ev));
  report.pipeline_runs = donors.size() + 1;
  return report;
}

std::vector<LooRun> leave_one_out(const Panel& panel, const PipelineConfig& config,
                                  const SynthFit& fit, std::size_t jobs) {
  require_valid(panel);
  std::vector<std::size_t> positive;
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    if (fit.beta(j) > 0.0) positive.push_back(fit.donor_indices[static_cast<std::size_t>(j)]);
  }
  if (positive.size() < 2) {
    throw ValidationError("leave_one_out: need at least 2 donors with positive weight, have " +
                          std::to_string(positive.size()));
  }
  const auto t0 = *panel.t0;
  std::vector<LooRun> runs(positive.size());
  parallel_for(positive.size(), jobs, [&](std::size_t i) {
    auto& run = runs[i];
    run.dropped = positive[i];
    run.label = panel.unit_labels[positive[i]];
    try {
      const auto res = run_pipeline(remove_unit(panel, positive[i]), config);
      run.counterfactual = res.fit.counterfactual_post;
      run.synthetic = res.fit.full_series();
    } catch (const std::exception& e) {
      run.error = e.what();
      run.counterfactual = Vector::Constant(static_cast<Eigen::Index>(panel.periods() - t0),
                                            std::numeric_limits<double>::quiet_NaN());
    }
  });
  return runs;
}

double max_pointwise_spread(const std::vector<LooRun>& runs) {
  double spread = 0.0;
  Eigen::Index len = -1;
  for (const auto& r : runs) {
    if (!r.error) len = r.counterfactual.size();
  }
  for (Eigen::Index t = 0; t < std::max<Eigen::Index>(len, 0); ++t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : runs) {
      if (r.error) continue;
      lo = std::min(lo, r.counterfactual(t));
      hi = std::max(hi, r.counterfactual(t));
    }
    spread = std::max(spread, hi - lo);
  }
  return spread;
}

}  // namespace rpsc
