// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance [--only N]... [--expect-fail N]... [--jobs J] [--fixtures DIR]
//
// Exit status: 1 when a criterion fails that was not named with --expect-fail;
// otherwise 77 when anything was skipped or failed as a known, documented
// deviation (ctest reports this as skipped); otherwise 0.

#include "cli.hpp"
#include "oracles.hpp"
#include "rpsc/error.hpp"
#include "rpsc/eval.hpp"
#include "rpsc/fpca.hpp"
#include "rpsc/nnls.hpp"
#include "rpsc/rpca.hpp"
#include "rpsc/sim.hpp"
#include "rpsc/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

using namespace rpsc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum class State { Pass, Fail, Skip } state = State::Pass;
  std::string detail;
};

struct Context {
  std::size_t jobs = 1;
  fs::path fixtures;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  Outcome outcome(std::string summary) const {
    if (failures_.empty()) return {Outcome::State::Pass, std::move(summary)};
    std::string msg = summary + "; failed: " + failures_.front();
    if (failures_.size() > 1) msg += " (+" + std::to_string(failures_.size() - 1) + " more)";
    return {Outcome::State::Fail, msg};
  }

 private:
  std::vector<std::string> failures_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome prox_oracles(const Context&) {
  const auto start = std::chrono::steady_clock::now();
  auto rng = make_stream(2024, 1);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> tau(0.05, 1.5);
  Checks c;
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    const Matrix x = oracle::random_matrix(dim(rng), dim(rng), rng);
    const double t = tau(rng);
    const double e1 = (soft_threshold(x, t) - oracle::l1_prox(x, t)).cwiseAbs().maxCoeff();
    const double e2 = (singular_value_threshold(x, t) - oracle::nuclear_prox(x, t, rng)).cwiseAbs().maxCoeff();
    worst = std::max({worst, e1, e2});
    c.expect(e1 < 1e-6, "soft threshold case " + std::to_string(rep) + " off by " + fmt(e1));
    c.expect(e2 < 1e-6, "singular value threshold case " + std::to_string(rep) + " off by " + fmt(e2));
  }
  const double secs = seconds_since(start);
  c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  return c.outcome("max deviation " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s");
}

Outcome rpca_recovery(const Context&) {
  const auto start = std::chrono::steady_clock::now();
  Checks c;
  double worst = 0.0;
  std::size_t most_iter = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = oracle::low_rank_plus_sparse(50, 2, 0.05, 100 + seed);
    const auto r = rpca_admm(inst.observed, default_hyperparams(inst.observed));
    const double err = (r.low_rank - inst.low_rank).norm() / inst.low_rank.norm();
    worst = std::max(worst, err);
    most_iter = std::max(most_iter, r.iterations);
    c.expect(err < 1e-4, "seed " + std::to_string(seed) + " relative error " + fmt(err));
    c.expect(r.converged && r.iterations < 1000, "seed " + std::to_string(seed) + " did not converge");
  }
  const double secs = seconds_since(start);
  c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
  return c.outcome("worst relative error " + fmt(worst, 3) + ", at most " + std::to_string(most_iter) +
                   " iterations, " + fmt(secs, 3) + " s");
}

// Increasing in sigma with at most one adjacent decrease, itself no larger than 10%.
bool near_monotone(const std::vector<double>& v) {
  int drops = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1]) {
      ++drops;
      if (v[i] < 0.9 * v[i - 1]) return false;
    }
  }
  return drops <= 1;
}

struct Published {
  double sigma2, pre, post;
};

const std::vector<Published> kTable3{{1, 0.09, 0.13}, {4, 0.19, 0.25}, {9, 0.29, 0.38}, {16, 0.39, 0.51}, {25, 0.49, 0.64}};
const std::vector<Published> kTable4{{1, 0.27, 0.65}, {4, 0.52, 1.14}, {9, 0.86, 1.69}, {16, 1.07, 2.65}, {25, 1.36, 2.59}};

std::string row_text(const StudyRow& r) {
  return "s2=" + fmt(r.sigma2) + " pre " + fmt(r.pre_rmspe, 3) + " post " + fmt(r.post_rmspe, 3);
}

Outcome study(const Context& ctx, bool missing) {
  const auto start = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.jobs = ctx.jobs;
  cfg.missing_fraction = missing ? 0.3 : 0.0;
  const auto all = run_simulation_study(cfg);
  std::vector<StudyRow> rows;
  for (const auto& r : all) {
    if ((r.variant == "missing") == missing) rows.push_back(r);
  }
  const auto& table = missing ? kTable4 : kTable3;
  const double band = missing ? 0.6 : 0.5;
  Checks c;
  std::vector<double> pre, post;
  std::string values;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& p = table[i];
    c.expect(r.sigma2 == p.sigma2, "unexpected noise level " + fmt(r.sigma2));
    c.expect(std::abs(r.pre_rmspe / p.pre - 1.0) <= band,
             row_text(r) + ": pre outside +-" + fmt(100 * band) + "% of " + fmt(p.pre));
    c.expect(std::abs(r.post_rmspe / p.post - 1.0) <= band,
             row_text(r) + ": post outside +-" + fmt(100 * band) + "% of " + fmt(p.post));
    if (!missing) {
      c.expect(r.clustering_accuracy == 1.0, row_text(r) + ": clustering accuracy " + fmt(r.clustering_accuracy));
      c.expect(r.first_fpc_explained > 0.95, row_text(r) + ": first FPC explains " + fmt(r.first_fpc_explained));
    }
    pre.push_back(r.pre_rmspe);
    post.push_back(r.post_rmspe);
    values += (i ? ", " : "") + fmt(r.pre_rmspe, 2) + "/" + fmt(r.post_rmspe, 2);
  }
  c.expect(rows.size() == table.size(), "expected " + std::to_string(table.size()) + " rows");
  if (!missing) {
    c.expect(near_monotone(pre), "pre errors not increasing in sigma");
    c.expect(near_monotone(post), "post errors not increasing in sigma");
  }
  const double secs = seconds_since(start);
  c.expect(secs < 300.0, "runtime " + fmt(secs) + " s");
  return c.outcome("pre/post " + values + ", " + fmt(secs, 3) + " s");
}

Outcome nnls_enumeration(const Context&) {
  auto rng = make_stream(77, 0);
  std::uniform_int_distribution<int> dims(1, 6), periods(6, 20);
  Checks c;
  double worst = 0.0, worst_kkt = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int d = dims(rng);
    const Matrix l_pre = oracle::random_matrix(d, periods(rng), rng);
    const Vector y = oracle::random_matrix(l_pre.cols(), 1, rng).col(0);
    const Vector beta = fit_weights(y, l_pre);
    const Matrix a = l_pre.transpose();
    const double err = (beta - oracle::nnls_enumerate(a, y).x).cwiseAbs().maxCoeff();
    // KKT residual relative to ||A^T y||_inf, the scale of the gradient at zero
    const double kkt = kkt_violation(a, y, beta) / std::max(1.0, (a.transpose() * y).cwiseAbs().maxCoeff());
    worst = std::max(worst, err);
    worst_kkt = std::max(worst_kkt, kkt);
    c.expect(err < 1e-6, "instance " + std::to_string(rep) + " off by " + fmt(err));
    c.expect(kkt <= 1e-8, "instance " + std::to_string(rep) + " KKT residual " + fmt(kkt));
  }
  return c.outcome("max deviation " + fmt(worst, 3) + ", max KKT residual " + fmt(worst_kkt, 3));
}

Outcome brownian_spectrum(const Context&) {
  const Vector grid = Vector::LinSpaced(200, 0.0, 1.0);
  Matrix cov(200, 200);
  for (Eigen::Index a = 0; a < 200; ++a) {
    for (Eigen::Index b = 0; b < 200; ++b) cov(a, b) = std::min(grid(a), grid(b));
  }
  const auto pairs = eigen_decompose(cov, grid);
  Checks c;
  std::string values;
  for (int k = 1; k <= 3; ++k) {
    const double expected = 4.0 / ((2 * k - 1) * (2 * k - 1) * std::numbers::pi * std::numbers::pi);
    const double rel = std::abs(pairs.values(k - 1) / expected - 1.0);
    c.expect(rel < 0.01, "eigenvalue " + std::to_string(k) + " off by " + fmt(100 * rel) + "%");
    values += (k > 1 ? ", " : "") + fmt(100 * rel, 2) + "%";
  }
  const Vector w = trapezoid_weights(grid);
  const Matrix gram = pairs.functions * w.asDiagonal() * pairs.functions.transpose();
  const double ortho = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  c.expect(ortho < 1e-6, "orthonormality defect " + fmt(ortho));
  return c.outcome("eigenvalue errors " + values + ", orthonormality defect " + fmt(ortho, 2));
}

Outcome west_germany(const Context& ctx) {
  const fs::path path = ctx.fixtures / "oecd_germany.csv";
  if (!fs::exists(path)) return {Outcome::State::Skip, "fixture " + path.filename().string() + " not present"};
  Panel panel = load_panel(path, Layout::Wide);
  panel.treated = find_unit(panel, "West Germany");
  panel.t0 = resolve_t0(panel, 1990);
  const auto res = run_pipeline(panel, {});
  Checks c;
  c.expect(res.tuning.selected_k == 3, "selected k = " + std::to_string(res.tuning.selected_k));
  const std::set<std::string> table1{"Australia", "Austria",     "Belgium", "Denmark", "France",        "Italy",
                                     "Japan",     "Netherlands", "New Zealand", "Norway", "United Kingdom"};
  std::set<std::string> donors;
  for (auto d : res.fit.donor_indices) donors.insert(panel.unit_labels[d]);
  c.expect(donors == table1, "donor pool has " + std::to_string(donors.size()) + " units, differs from Table 1");
  const std::map<std::string, double> table2{{"Austria", 0.02}, {"France", 0.35}, {"New Zealand", 0.29}, {"Norway", 0.48}};
  std::set<std::string> support;
  for (std::size_t j = 0; j < res.fit.donor_indices.size(); ++j) {
    const auto& label = panel.unit_labels[res.fit.donor_indices[j]];
    const double b = res.fit.beta(static_cast<Eigen::Index>(j));
    if (b > 1e-8) support.insert(label);
    const auto it = table2.find(label);
    const double published = it == table2.end() ? 0.0 : it->second;
    c.expect(std::abs(b - published) <= 0.15, label + " weight " + fmt(b) + " vs " + fmt(published));
  }
  c.expect(support == std::set<std::string>{"Austria", "France", "New Zealand", "Norway"},
           "positive-weight support has " + std::to_string(support.size()) + " units");
  const auto report = placebo_in_space(panel, {}, ctx.jobs);
  c.expect(report.treated_ratio_is_max(), "West Germany ratio is not the maximum");
  return c.outcome("k = " + std::to_string(res.tuning.selected_k) + ", " + std::to_string(donors.size()) +
                   " donors, " + std::to_string(support.size()) + " positive weights");
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return files;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "rpsc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream sink;
  return run_cli(static_cast<int>(argv.size()), argv.data(), sink, sink);
}

Outcome determinism(const Context& ctx) {
  const fs::path root = fs::temp_directory_path() / "rpsc_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string input = (root / "panel.csv").string();
  oracle::write_csv(input, oracle::demo_panel());
  const std::vector<std::string> data{"--input", input, "--treated", "treated land", "--t0", "1990", "--seed", "13"};
  const std::string jobs = std::to_string(ctx.jobs);
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"fit", {"fit"}},
      {"placebo-time", {"placebo-time", "--fake-t0", "1975"}},
      {"placebo-space", {"placebo-space", "--jobs", jobs}},
      {"loo", {"loo", "--jobs", jobs}},
      {"fpca-report", {"fpca-report"}},
      {"spectrum", {"spectrum"}},
  };
  Checks c;
  std::size_t compared = 0;
  for (const auto& [name, head] : runs) {
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / (name + "_" + std::to_string(rep));
      auto args = head;
      args.insert(args.end(), data.begin(), data.end());
      args.insert(args.end(), {"--out", out.string()});
      const int code = invoke(args);
      c.expect(code == 0, name + " exited with " + std::to_string(code));
      auto files = snapshot(out);
      if (rep == 0) {
        first = std::move(files);
      } else {
        c.expect(files == first, name + " outputs differ between runs");
        compared += files.size();
      }
    }
  }
  std::map<std::string, std::string> first;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = root / ("simulate_" + std::to_string(rep));
    const int code = invoke({"simulate", "--sigma2", "1", "--sigma2", "9", "--seed", "7", "--n1", "30", "--n2",
                             "20", "--t-max", "80", "--t0", "50", "--jobs", jobs, "--out", out.string()});
    c.expect(code == 0, "simulate exited with " + std::to_string(code));
    auto files = snapshot(out);
    if (rep == 0) {
      first = std::move(files);
    } else {
      c.expect(files == first, "simulate outputs differ between runs");
      compared += files.size();
    }
  }
  fs::remove_all(root);
  return c.outcome(std::to_string(compared) + " files byte-identical across 7 subcommands");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the rpsc library"};
  std::vector<int> only;
  std::vector<int> expect_fail;
  Context ctx;
  ctx.jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string fixtures = RPSC_FIXTURES;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--expect-fail", expect_fail, "Criteria with a documented deviation");
  app.add_option("--jobs", ctx.jobs, "Parallel jobs");
  app.add_option("--fixtures", fixtures, "Fixture directory");
  CLI11_PARSE(app, argc, argv);
  ctx.fixtures = fixtures;

  const std::vector<Criterion> criteria{
      {1, "proximal operators match numerical minimizers", prox_oracles},
      {2, "RPCA exact recovery on 10 seeded 50x50 instances", rpca_recovery},
      {3, "simulation study reproduces Table 3", [](const Context& c) { return study(c, false); }},
      {4, "missing-data study reproduces Table 4", [](const Context& c) { return study(c, true); }},
      {5, "NNLS matches support enumeration", nnls_enumeration},
      {6, "FPCA recovers the Brownian motion spectrum", brownian_spectrum},
      {7, "West Germany case study", west_germany},
      {8, "CLI outputs are byte-identical across repeated runs", determinism},
  };

  int unexpected = 0;
  int not_passed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    Outcome o;
    try {
      o = cr.run(ctx);
    } catch (const std::exception& e) {
      o = {Outcome::State::Fail, std::string("exception: ") + e.what()};
    }
    const bool known = std::find(expect_fail.begin(), expect_fail.end(), cr.id) != expect_fail.end();
    const char* tag = o.state == Outcome::State::Pass ? "PASS" : o.state == Outcome::State::Skip ? "SKIP" : "FAIL";
    std::cout << tag << "  " << cr.id << ". " << cr.name << ": " << o.detail;
    if (known && o.state == Outcome::State::Fail) std::cout << " [known deviation]";
    if (known && o.state == Outcome::State::Pass) std::cout << " [listed as known deviation but passed]";
    std::cout << std::endl;
    if (o.state == Outcome::State::Fail && !known) ++unexpected;
    if (o.state != Outcome::State::Pass) ++not_passed;
  }
  if (unexpected > 0) return 1;
  return not_passed > 0 ? 77 : 0;
}
