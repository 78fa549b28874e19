#include "cli.hpp"

#include "rpsc/error.hpp"
#include "rpsc/eval.hpp"
#include "rpsc/report.hpp"
#include "rpsc/rmspe.hpp"
#include "rpsc/sim.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <ostream>
#include <string>
#include <vector>

namespace rpsc {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string input;
  std::string layout = "wide";
  std::optional<std::string> treated;
  std::optional<double> t0_label;
  std::optional<double> fake_t0_label;
  std::string out_dir = "rpsc_out";
  std::string config_file;
  std::size_t jobs = 1;

  double threshold = 0.95;
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::size_t restarts = 50;
  std::uint64_t seed = 0;
  std::string kernel = "epanechnikov";
  std::optional<double> bandwidth_mean;
  std::optional<double> bandwidth_cov;
  std::optional<std::size_t> grid_size;
  std::optional<double> lambda;
  std::optional<double> mu;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  bool zero_dual_init = false;

  // simulate
  std::vector<double> sigma2{1.0, 4.0, 9.0, 16.0, 25.0};
  std::size_t n1 = 100;
  std::size_t n2 = 100;
  std::size_t t_max = 250;
  std::size_t sim_t0 = 150;
  double missing_fraction = 0.3;
};

PipelineConfig pipeline_config(const RunConfig& rc) {
  PipelineConfig cfg;
  cfg.smoothing.kernel = parse_kernel(rc.kernel);
  cfg.smoothing.bandwidth_mean = rc.bandwidth_mean;
  cfg.smoothing.bandwidth_cov = rc.bandwidth_cov;
  cfg.smoothing.grid_size = rc.grid_size;
  cfg.score_threshold = rc.threshold;
  cfg.k_min = rc.k_min;
  cfg.k_max = rc.k_max;
  cfg.restarts = rc.restarts;
  cfg.seed = rc.seed;
  cfg.rpca.lambda = rc.lambda;
  cfg.rpca.mu = rc.mu;
  cfg.rpca.tol = rc.tol;
  cfg.rpca.max_iter = rc.max_iter;
  cfg.rpca.zero_dual_init = rc.zero_dual_init;
  return cfg;
}

void add_pipeline_options(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--threshold", rc.threshold, "Explained-variance share used to pick the FPC score count")
      ->check(CLI::Range(1e-12, 1.0));
  cmd->add_option("--k-min", rc.k_min, "Smallest number of clusters tried")->check(CLI::Range(2, 1000));
  cmd->add_option("--k-max", rc.k_max, "Largest number of clusters tried")->check(CLI::Range(2, 1000));
  cmd->add_option("--restarts", rc.restarts, "K-means restarts per k")->check(CLI::Range(1, 1000000));
  cmd->add_option("--seed", rc.seed, "Random seed");
  cmd->add_option("--kernel", rc.kernel, "Smoothing kernel")
      ->check(CLI::IsMember({"epanechnikov", "gaussian"}));
  cmd->add_option("--bandwidth-mean", rc.bandwidth_mean, "Mean smoothing bandwidth (time units)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--bandwidth-cov", rc.bandwidth_cov, "Covariance smoothing bandwidth (time units)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--grid-size", rc.grid_size, "Number of equispaced FPCA grid points")
      ->check(CLI::Range(2, 100000));
  cmd->add_option("--lambda", rc.lambda, "RPCA sparsity weight")->check(CLI::PositiveNumber);
  cmd->add_option("--mu", rc.mu, "RPCA penalty parameter")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", rc.tol, "RPCA feasibility tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", rc.max_iter, "RPCA iteration cap")->check(CLI::Range(1, 100000000));
  cmd->add_flag("--zero-dual-init", rc.zero_dual_init, "Start the RPCA dual variable at zero");
  cmd->add_option("--jobs", rc.jobs, "Parallel jobs for placebo, leave-one-out and simulation runs")
      ->check(CLI::Range(1, 1024));
  cmd->add_option("--out", rc.out_dir, "Output directory");
  cmd->add_option("--config", rc.config_file, "Flat key=value file; flags take precedence");
}

void add_data_options(CLI::App* cmd, RunConfig& rc, bool need_treated, bool need_t0) {
  auto* in = cmd->add_option("--input", rc.input, "Panel CSV file")->required();
  (void)in;
  cmd->add_option("--layout", rc.layout, "CSV layout")->check(CLI::IsMember({"wide", "long"}));
  auto* tr = cmd->add_option("--treated", rc.treated, "Treated unit label");
  auto* t0 = cmd->add_option("--t0", rc.t0_label, "Last pre-intervention time label (e.g. 1990)");
  if (need_treated) tr->required();
  if (need_t0) t0->required();
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConversionError("config line " + std::to_string(n) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Values from the config file fill options that were not given as flags.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  for (const auto& [key, value] : read_config_file(path)) {
    auto* opt = cmd->get_option_no_throw("--" + key);
    if (!opt || key == "config") {
      throw CLI::ExtrasError("unknown config key '" + key + "'", CLI::ExitCodes::ExtrasError);
    }
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") opt->add_result("true");
      else if (value == "false" || value == "0") continue;
      else throw CLI::ConversionError("config key '" + key + "' expects true or false");
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

Panel load_input(const RunConfig& rc, std::ostream& err) {
  Panel panel = load_panel(rc.input, parse_layout(rc.layout));
  if (!has_regular_spacing(panel.time_labels)) {
    err << "warning: time labels are irregularly spaced; FPCA uses a " << "100-point grid\n";
  }
  if (rc.treated) panel.treated = find_unit(panel, *rc.treated);
  if (rc.t0_label) panel.t0 = resolve_t0(panel, *rc.t0_label);
  return panel;
}

std::string short_number(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

fs::path prepare_out(const RunConfig& rc) {
  fs::path dir(rc.out_dir);
  fs::create_directories(dir);
  return dir;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  fn(out);
}

void write_json(const fs::path& path, const Json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

Matrix donor_block(const Panel& panel, const std::vector<std::size_t>& donors, Mask* mask = nullptr) {
  Matrix y(static_cast<Eigen::Index>(donors.size()), panel.values.cols());
  if (mask) mask->resize(y.rows(), y.cols());
  for (std::size_t r = 0; r < donors.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(donors[r]);
    y.row(static_cast<Eigen::Index>(r)) = panel.values.row(i);
    if (mask) mask->row(static_cast<Eigen::Index>(r)) = panel.mask.row(i);
  }
  if (mask) y = mask->select(y, Matrix::Zero(y.rows(), y.cols()));
  return y;
}

void print_fit(std::ostream& out, const Panel& panel, const PipelineResult& res) {
  const auto& fit = res.fit;
  out << "treated unit:   " << panel.unit_labels[*panel.treated] << "\n";
  out << "FPC scores:     " << fit.config_used.num_scores << " (first explains "
      << format_number(res.fpca.explained(0)) << ")\n";
  out << "selected k:     " << res.clustering.k << "\n";
  out << "donor pool (" << fit.donor_indices.size() << "):";
  for (auto d : fit.donor_indices) out << ' ' << panel.unit_labels[d] << ';';
  out << "\nweights:\n";
  for (std::size_t j = 0; j < fit.donor_indices.size(); ++j) {
    const double b = fit.beta(static_cast<Eigen::Index>(j));
    if (b > 0.0) out << "  " << std::left << std::setw(24) << panel.unit_labels[fit.donor_indices[j]] << format_number(b) << '\n';
  }
  out << "pre-period RMSPE: " << format_number(fit.pre_rmspe) << "\n";
  out << "RPCA: " << res.rpca.iterations << " iterations, residual " << format_number(res.rpca.residual)
      << (res.rpca.converged ? "" : " (not converged)") << "\n";
}

int cmd_fit(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  const auto res = run_pipeline(panel, pipeline_config(rc));
  const auto dir = prepare_out(rc);
  write_json(dir / "summary.json", fit_summary(panel, res));
  write_file(dir / "series.csv", [&](std::ostream& o) { write_series_csv(o, panel, res.fit); });
  write_file(dir / "scree.csv", [&](std::ostream& o) { write_scree_csv(o, res.fpca); });
  write_file(dir / "tune.csv", [&](std::ostream& o) { write_tune_csv(o, res.tuning); });
  Mask m;
  const Matrix y = donor_block(panel, res.fit.donor_indices, &m);
  write_file(dir / "spectrum.csv", [&](std::ostream& o) { write_spectrum_csv(o, spectrum_report(y)); });
  print_fit(out, panel, res);
  return kExitOk;
}

int cmd_placebo_time(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  require_valid(panel);
  const std::size_t fake = resolve_t0(panel, *rc.fake_t0_label);
  const auto placebo = placebo_in_time(panel, fake, pipeline_config(rc));
  Panel shown = truncate_periods(panel, placebo.window_end);
  shown.t0 = fake;
  const auto dir = prepare_out(rc);
  Json summary = fit_summary(shown, placebo.result);
  const auto tr = static_cast<Eigen::Index>(*panel.treated);
  const Vector actual = shown.values.row(tr).transpose();
  const Vector synthetic = placebo.result.fit.full_series();
  const Eigen::Array<bool, Eigen::Dynamic, 1> seen = shown.mask.row(tr).transpose();
  const double window = rmspe(actual, synthetic, fake, placebo.window_end, &seen);
  summary["placebo_window_rmspe"] = window;
  write_json(dir / "summary.json", summary);
  write_file(dir / "series.csv", [&](std::ostream& o) { write_series_csv(o, shown, placebo.result.fit); });
  print_fit(out, shown, placebo.result);
  out << "placebo-window RMSPE: " << format_number(window) << "\n";
  return kExitOk;
}

int cmd_placebo_space(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  const auto report = placebo_in_space(panel, pipeline_config(rc), rc.jobs);
  const auto dir = prepare_out(rc);
  write_json(dir / "summary.json", eval_summary(panel, report));
  write_file(dir / "ratios.csv", [&](std::ostream& o) { write_ratios_csv(o, report); });
  out << "post/pre RMSPE ratios (" << report.pipeline_runs << " pipeline runs):\n";
  for (const auto& u : report.units) {
    out << "  " << std::left << std::setw(24) << u.label;
    if (u.error) out << "failed: " << *u.error << '\n';
    else out << format_number(u.ratio) << (u.is_treated ? "  (treated)" : "") << '\n';
  }
  out << "treated ratio is the maximum: " << (report.treated_ratio_is_max() ? "yes" : "no") << "\n";
  return kExitOk;
}

int cmd_loo(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  const auto cfg = pipeline_config(rc);
  const auto base = run_pipeline(panel, cfg);
  const auto runs = leave_one_out(panel, cfg, base.fit, rc.jobs);
  const auto dir = prepare_out(rc);
  Json summary = fit_summary(panel, base);
  summary["leave_one_out"] = loo_summary(panel, runs);
  summary["max_pointwise_spread"] = max_pointwise_spread(runs);
  write_json(dir / "summary.json", summary);
  write_file(dir / "series.csv", [&](std::ostream& o) { write_series_csv(o, panel, base.fit); });
  write_file(dir / "loo.csv", [&](std::ostream& o) { write_loo_csv(o, panel, runs); });
  print_fit(out, panel, base);
  out << "leave-one-out runs: " << runs.size() << "\n";
  for (const auto& r : runs) {
    out << "  without " << r.label << (r.error ? ": failed: " + *r.error : "") << "\n";
  }
  out << "max pointwise spread: " << format_number(max_pointwise_spread(runs)) << "\n";
  return kExitOk;
}

int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  SimConfig cfg;
  cfg.n1 = rc.n1;
  cfg.n2 = rc.n2;
  cfg.t_max = rc.t_max;
  cfg.t0 = rc.sim_t0;
  cfg.sigma2_list = rc.sigma2;
  cfg.missing_fraction = rc.missing_fraction;
  cfg.seed = rc.seed;
  cfg.pipeline = pipeline_config(rc);
  cfg.jobs = rc.jobs;
  const auto rows = run_simulation_study(cfg);
  const auto dir = prepare_out(rc);
  write_json(dir / "summary.json", study_summary(rows));
  write_file(dir / "study.csv", [&](std::ostream& o) { write_study_csv(o, rows); });
  write_file(dir / "sim_series.csv", [&](std::ostream& o) { write_sim_series_csv(o, rows); });
  out << "sigma2   variant  pre_rmspe  post_rmspe  accuracy  k\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(9) << short_number(r.sigma2) << std::setw(9) << r.variant
        << std::setw(11) << short_number(r.pre_rmspe) << std::setw(12) << short_number(r.post_rmspe)
        << std::setw(10) << short_number(r.clustering_accuracy) << r.k << '\n';
  }
  return kExitOk;
}

int cmd_fpca_report(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  const auto fpca = run_fpca(pre_period_curves(panel), pipeline_config(rc).smoothing);
  const auto k = select_num_scores(fpca.eigenvalues, rc.threshold);
  const auto dir = prepare_out(rc);
  Json summary = fpca_summary(fpca);
  summary["num_scores"] = k;
  write_json(dir / "fpca.json", summary);
  write_file(dir / "fpca.csv", [&](std::ostream& o) { write_fpca_csv(o, fpca); });
  write_file(dir / "scree.csv", [&](std::ostream& o) { write_scree_csv(o, fpca); });
  write_file(dir / "scores.csv", [&](std::ostream& o) { write_scores_csv(o, panel, fpca); });
  out << "components: " << fpca.eigenvalues.size() << ", selected " << k << " at threshold "
      << format_number(rc.threshold) << "\n";
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(fpca.explained.size(), 5); ++i) {
    out << "  " << i + 1 << ": cumulative " << format_number(fpca.explained(i)) << '\n';
  }
  return kExitOk;
}

int cmd_spectrum(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Panel panel = load_input(rc, err);
  Matrix y;
  Json summary;
  if (panel.treated) {
    const auto res = run_pipeline(panel, pipeline_config(rc));
    y = donor_block(panel, res.fit.donor_indices);
    Json donors = Json::array();
    for (auto d : res.fit.donor_indices) donors.push_back(panel.unit_labels[d]);
    summary["matrix"] = "donor pool";
    summary["donors"] = donors;
  } else {
    y = panel.mask.select(panel.values, Matrix::Zero(panel.values.rows(), panel.values.cols()));
    summary["matrix"] = "all units";
  }
  const auto spec = spectrum_report(y);
  summary["singular_values"] = to_json(spec.singular_values);
  summary["cumulative"] = to_json(spec.cumulative);
  const auto dir = prepare_out(rc);
  write_json(dir / "summary.json", summary);
  write_file(dir / "spectrum.csv", [&](std::ostream& o) { write_spectrum_csv(o, spec); });
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(spec.singular_values.size(), 5); ++i) {
    out << "  sigma_" << i + 1 << " = " << format_number(spec.singular_values(i)) << "  cumulative "
        << format_number(spec.cumulative(i)) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Robust PCA synthetic control: counterfactual estimation on panel data"};
  app.name("rpsc");
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Estimate the counterfactual of the treated unit");
  add_data_options(fit, rc, true, true);
  add_pipeline_options(fit, rc);

  auto* ptime = app.add_subcommand("placebo-time", "Rerun with an earlier, fictitious intervention");
  add_data_options(ptime, rc, true, true);
  ptime->add_option("--fake-t0", rc.fake_t0_label, "Last pre-period label of the placebo intervention")
      ->required();
  add_pipeline_options(ptime, rc);

  auto* pspace = app.add_subcommand("placebo-space", "Reassign the treatment to each donor");
  add_data_options(pspace, rc, true, true);
  add_pipeline_options(pspace, rc);

  auto* loo = app.add_subcommand("loo", "Leave out each positive-weight donor in turn");
  add_data_options(loo, rc, true, true);
  add_pipeline_options(loo, rc);

  auto* sim = app.add_subcommand("simulate", "Run the two-process simulation study");
  sim->add_option("--sigma2", rc.sigma2, "Noise variances")->check(CLI::PositiveNumber);
  sim->add_option("--n1", rc.n1, "Units of the first process")->check(CLI::Range(2, 1000000));
  sim->add_option("--n2", rc.n2, "Units of the second process")->check(CLI::Range(1, 1000000));
  sim->add_option("--t-max", rc.t_max, "Horizon; time runs over 1..t-max")->check(CLI::Range(3, 1000000));
  sim->add_option("--t0", rc.sim_t0, "Last pre-intervention time")->check(CLI::Range(2, 1000000));
  sim->add_option("--missing-fraction", rc.missing_fraction, "Share of donor cells dropped; 0 skips")
      ->check(CLI::Range(0.0, 0.999999));
  add_pipeline_options(sim, rc);

  auto* fpca = app.add_subcommand("fpca-report", "FPCA of the pre-intervention curves");
  add_data_options(fpca, rc, false, true);
  add_pipeline_options(fpca, rc);

  auto* spectrum = app.add_subcommand("spectrum", "Singular-value spectrum of the donor pool (or all units)");
  add_data_options(spectrum, rc, false, false);
  add_pipeline_options(spectrum, rc);

  try {
    app.parse(argc, argv);
    for (auto* cmd : app.get_subcommands()) {
      if (!rc.config_file.empty()) apply_config_file(cmd, rc.config_file);
    }
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (fit->parsed()) return cmd_fit(rc, out, err);
    if (ptime->parsed()) return cmd_placebo_time(rc, out, err);
    if (pspace->parsed()) return cmd_placebo_space(rc, out, err);
    if (loo->parsed()) return cmd_loo(rc, out, err);
    if (sim->parsed()) return cmd_simulate(rc, out);
    if (fpca->parsed()) return cmd_fpca_report(rc, out, err);
    if (spectrum->parsed()) return cmd_spectrum(rc, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace rpsc
