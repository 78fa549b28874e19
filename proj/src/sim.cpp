#include "rpsc/sim.hpp"

#include "rpsc/error.hpp"
#include "rpsc/parallel.hpp"
#include "rpsc/random.hpp"
#include "rpsc/rmspe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rpsc {

namespace {

constexpr std::uint64_t kMissingStream = 0x6d697373ULL;

void check(const SimConfig& cfg) {
  if (cfg.t_max < 3 || cfg.t0 < 2 || cfg.t0 >= cfg.t_max) {
    throw ValidationError("simulation: need 2 <= t0 < t_max");
  }
  if (cfg.n1 < 2 || cfg.n2 < 1) throw ValidationError("simulation: cohorts too small");
  if (!(cfg.missing_fraction >= 0.0 && cfg.missing_fraction < 1.0)) {
    throw ValidationError("simulation: missing fraction must lie in [0, 1)");
  }
  for (double s : cfg.sigma2_list) {
    if (!(s > 0.0)) throw ValidationError("simulation: noise variances must be positive");
  }
}

StudyRow run_cell(const SimConfig& cfg, const SimData& data, const Panel& panel, double sigma2,
                  const char* variant) {
  const auto res = run_pipeline(panel, cfg.pipeline);
  const auto t0 = static_cast<Eigen::Index>(cfg.t0);
  const auto T = static_cast<Eigen::Index>(cfg.t_max);
  StudyRow row;
  row.sigma2 = sigma2;
  row.variant = variant;
  row.truth = data.f1_truth;
  row.estimate = res.fit.full_series();
  row.pre_rmspe = rmspe(row.truth.head(t0), row.estimate.head(t0));
  row.post_rmspe = rmspe(row.truth.tail(T - t0), row.estimate.tail(T - t0));
  const std::vector<std::size_t> noisy(res.clustering.assignment.begin(),
                                       res.clustering.assignment.begin() +
                                           static_cast<std::ptrdiff_t>(data.cohort.size()));
  row.clustering_accuracy = clustering_accuracy(noisy, data.cohort, res.clustering.k);
  row.first_fpc_explained = res.fpca.explained(0);
  row.k = res.clustering.k;
  row.donors = res.fit.donor_indices.size();
  row.time_labels = panel.time_labels;
  return row;
}

}  // namespace

double f1_mean(double t, double horizon) {
  const double m10 = std::fmod(t, 10.0);
  return 0.3 * std::fmod(t, horizon + 1.0) - m10 * std::sin(t / std::numbers::pi) +
         m10 * std::cos(t / std::numbers::pi);
}

double f2_mean(double t) {
  return std::log(t) + 4.0 * std::sin(t / std::numbers::pi) + 4.0 * std::cos(t / std::numbers::pi);
}

SimData generate_processes(const SimConfig& cfg, double sigma2) {
  check(cfg);
  const auto T = static_cast<Eigen::Index>(cfg.t_max);
  const auto n = static_cast<Eigen::Index>(cfg.n1 + cfg.n2);
  const double sigma = std::sqrt(sigma2);

  SimData d;
  d.f1_truth.resize(T);
  d.f2_truth.resize(T);
  std::vector<double> times(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    const double time = static_cast<double>(t + 1);
    times[static_cast<std::size_t>(t)] = time;
    d.f1_truth(t) = f1_mean(time, static_cast<double>(cfg.t_max));
    d.f2_truth(t) = f2_mean(time);
  }

  Panel& p = d.panel;
  p.values.resize(n + 1, T);
  p.mask = Mask::Constant(n + 1, T, true);
  p.time_labels = times;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool first = i < static_cast<Eigen::Index>(cfg.n1);
    auto rng = make_stream(cfg.seed, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vector& truth = first ? d.f1_truth : d.f2_truth;
    for (Eigen::Index t = 0; t < T; ++t) p.values(i, t) = truth(t) + sigma * normal(rng);
    d.cohort.push_back(first ? 1 : 2);
    const auto local = first ? i : i - static_cast<Eigen::Index>(cfg.n1);
    p.unit_labels.push_back((first ? "f1_" : "f2_") + std::to_string(local));
  }
  p.values.row(n) = d.f1_truth.transpose();
  p.unit_labels.emplace_back("truth");
  p.treated = static_cast<std::size_t>(n);
  p.t0 = cfg.t0;
  return d;
}

Panel drop_missing(const Panel& panel, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValidationError("drop_missing: fraction must lie in [0, 1)");
  Panel out = panel;
  const auto M = panel.values.rows();
  const auto T = panel.values.cols();
  std::vector<Eigen::Index> cells;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (panel.treated && static_cast<std::size_t>(i) == *panel.treated) continue;
    for (Eigen::Index t = 0; t < T; ++t) cells.push_back(i * T + t);
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size())));
  auto rng = make_stream(seed, kMissingStream);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
    const auto cell = cells[i];
    out.mask(cell / T, cell % T) = false;
    out.values(cell / T, cell % T) = 0.0;
  }
  return out;
}

double clustering_accuracy(const std::vector<std::size_t>& assignment, const std::vector<int>& cohort,
                           std::size_t k) {
  if (assignment.size() != cohort.size() || assignment.empty()) {
    throw ValidationError("clustering_accuracy: size mismatch");
  }
  // counts[c][l]: members of cohort c in cluster l
  std::vector<std::vector<std::size_t>> counts(2, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    ++counts[cohort[i] == 1 ? 0 : 1][assignment[i]];
  }
  std::size_t best = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a != b) best = std::max(best, counts[0][a] + counts[1][b]);
    }
  }
  return static_cast<double>(best) / static_cast<double>(assignment.size());
}

std::vector<StudyRow> run_simulation_study(const SimConfig& cfg) {
  check(cfg);
  const bool with_missing = cfg.missing_fraction > 0.0;
  const std::size_t variants = with_missing ? 2 : 1;
  const std::size_t cells = cfg.sigma2_list.size() * variants;
  std::vector<StudyRow> rows(cells);
  std::vector<std::string> errors(cells);
  parallel_for(cells, cfg.jobs, [&](std::size_t c) {
    const double sigma2 = cfg.sigma2_list[c / variants];
    const bool missing = c % variants == 1;
    try {
      const auto data = generate_processes(cfg, sigma2);
      if (missing) {
        const Panel p = drop_missing(data.panel, cfg.missing_fraction, cfg.seed);
        rows[c] = run_cell(cfg, data, p, sigma2, "missing");
      } else {
        rows[c] = run_cell(cfg, data, data.panel, sigma2, "full");
      }
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "sigma2=" << sigma2 << (missing ? " (missing)" : "") << ": " << e.what();
      errors[c] = os.str();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError("simulation study: " + e);
  }
  return rows;
}

}  // namespace rpsc
