#pragma once

#include "rpsc/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace rpsc {

struct SimConfig {
  std::size_t n1 = 100;
  std::size_t n2 = 100;
  std::size_t t_max = 250;  // time runs over 1..t_max
  std::size_t t0 = 150;     // last pre-intervention time
  std::vector<double> sigma2_list{1.0, 4.0, 9.0, 16.0, 25.0};
  double missing_fraction = 0.3;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  std::size_t jobs = 1;
};

/// Noiseless first process: 0.3 (t mod (T+1)) - (t mod 10) sin(t/pi) + (t mod 10) cos(t/pi).
double f1_mean(double t, double horizon);

/// Noiseless second process: log(t) + 4 sin(t/pi) + 4 cos(t/pi).
double f2_mean(double t);

struct SimData {
  Panel panel;      // n1 noisy f1 rows, n2 noisy f2 rows, then the f1 truth (treated)
  Vector f1_truth;  // length t_max
  Vector f2_truth;
  std::vector<int> cohort;  // 1 or 2 for each noisy row
};

/// Gaussian noise of variance `sigma2`; row i draws from stream (seed, i), so
/// the standard normal draws of a unit do not depend on the cohort sizes of
/// other units or on sigma2.
SimData generate_processes(const SimConfig& cfg, double sigma2);

/// Masks exactly round(fraction * cells) uniformly chosen cells outside the
/// treated row.
Panel drop_missing(const Panel& panel, double fraction, std::uint64_t seed);

/// Share of noisy units whose cluster matches their cohort under the best
/// one-to-one matching of the two cohorts to clusters.
double clustering_accuracy(const std::vector<std::size_t>& assignment, const std::vector<int>& cohort,
                           std::size_t k);

struct StudyRow {
  double sigma2 = 0.0;
  std::string variant;  // "full" or "missing"
  double pre_rmspe = 0.0;
  double post_rmspe = 0.0;
  double clustering_accuracy = 0.0;
  double first_fpc_explained = 0.0;
  std::size_t k = 0;
  std::size_t donors = 0;
  Vector truth;
  Vector estimate;
  std::vector<double> time_labels;
};

/// For each sigma2: the full-data pipeline and, when missing_fraction > 0,
/// the same data with missing cells. Errors are measured against the f1
/// truth on both windows.
std::vector<StudyRow> run_simulation_study(const SimConfig& cfg);

}  // namespace rpsc
