#pragma once

#include "rpsc/synth.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rpsc {

/// Fit quality of one (real or placebo) treated unit.
struct UnitEvaluation {
  std::size_t unit = 0;  // index in the input panel
  std::string label;
  bool is_treated = false;  // the real treated unit
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  double ratio = 0.0;  // post / pre; +inf when pre == 0
  Vector actual;       // full horizon
  Vector synthetic;    // fitted pre-period followed by counterfactual
  std::optional<std::string> error;
};

struct EvalReport {
  std::vector<UnitEvaluation> units;  // real treated unit first
  std::size_t pipeline_runs = 0;

  const UnitEvaluation* find(const std::string& label) const;
  /// True when the real treated unit has the strictly largest ratio among
  /// the units that ran successfully.
  bool treated_ratio_is_max() const;
};

struct PlaceboInTime {
  PipelineResult result;
  std::size_t fake_t0 = 0;
  std::size_t window_end = 0;  // the real intervention index
};

/// Reruns the pipeline with the intervention moved to `fake_t0` (< t0) on the
/// data up to the real intervention; the counterfactual covers
/// [fake_t0, t0).
PlaceboInTime placebo_in_time(const Panel& panel, std::size_t fake_t0, const PipelineConfig& config);

/// Reassigns the treatment to each donor of the real treated unit and reruns
/// the full pipeline with the real treated unit removed from the data. Run u
/// uses seed `config.seed + u` (u = unit index in `panel`), the real treated
/// unit included. Failing placebo runs are recorded, not thrown.
EvalReport placebo_in_space(const Panel& panel, const PipelineConfig& config, std::size_t jobs = 1);

struct LooRun {
  std::size_t dropped = 0;  // index in the input panel
  std::string label;
  Vector counterfactual;    // post-period
  Vector synthetic;         // full horizon
  std::optional<std::string> error;
};

/// Drops each positive-weight donor of `fit` in turn and reruns the pipeline.
std::vector<LooRun> leave_one_out(const Panel& panel, const PipelineConfig& config,
                                  const SynthFit& fit, std::size_t jobs = 1);

/// Largest pointwise range across the successful leave-one-out counterfactuals.
double max_pointwise_spread(const std::vector<LooRun>& runs);

}  // namespace rpsc
