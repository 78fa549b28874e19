#pragma once

#include "rpsc/eval.hpp"
#include "rpsc/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace rpsc {

using Json = nlohmann::ordered_json;

/// Shortest round-trip-safe text for CSV cells; empty for NaN.
std::string format_number(double v);

Json to_json(const Vector& v);
Json to_json(const RpcaConfig& cfg);
Json to_json(const ResolvedConfig& cfg);

// fpca
void write_fpca_csv(std::ostream& out, const FpcaResult& fpca);
void write_scree_csv(std::ostream& out, const FpcaResult& fpca);
void write_scores_csv(std::ostream& out, const Panel& panel, const FpcaResult& fpca);
Json fpca_summary(const FpcaResult& fpca);

// cluster
void write_tune_csv(std::ostream& out, const TuneResult& tuning);

// rpca
void write_spectrum_csv(std::ostream& out, const SpectrumReport& spectrum);
Json rpca_summary(const RpcaResult& rpca);

// synth
/// time, actual, counterfactual, gap over the full horizon; the
/// counterfactual column holds the in-sample fit before the intervention.
void write_series_csv(std::ostream& out, const Panel& panel, const SynthFit& fit);
Json fit_summary(const Panel& panel, const PipelineResult& result);

// eval
void write_ratios_csv(std::ostream& out, const EvalReport& report);
void write_loo_csv(std::ostream& out, const Panel& panel, const std::vector<LooRun>& runs);
Json eval_summary(const Panel& panel, const EvalReport& report);
Json loo_summary(const Panel& panel, const std::vector<LooRun>& runs);

// sim
void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows);
void write_sim_series_csv(std::ostream& out, const std::vector<StudyRow>& rows);
Json study_summary(const std::vector<StudyRow>& rows);

}  // namespace rpsc
