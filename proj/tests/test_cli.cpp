#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rpsc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = rpsc::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path dir;
  std::string wide;
  std::string longp;
  Workspace() {
    dir = fs::temp_directory_path() / "rpsc_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    wide = (dir / "panel.csv").string();
    longp = (dir / "panel_long.csv").string();
    oracle::write_csv(wide, oracle::demo_panel());
    oracle::write_csv(longp, oracle::demo_panel(), rpsc::Layout::Long);
  }
  std::string out(const std::string& name) const { return (dir / name).string(); }
};

const Workspace& ws() {
  static const Workspace w;
  return w;
}

std::vector<std::string> fit_args(const std::string& cmd, const std::string& out) {
  return {cmd, "--input", ws().wide, "--treated", "treated land", "--t0", "1990", "--out", out};
}

}  // namespace

TEST_CASE("fit writes the summary and plot data") {
  const auto out = ws().out("fit");
  const auto r = cli(fit_args("fit", out));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("selected k") != std::string::npos);
  CHECK(r.out.find("weights") != std::string::npos);
  for (const char* f : {"summary.json", "series.csv", "scree.csv", "tune.csv", "spectrum.csv"}) {
    CHECK(fs::exists(fs::path(out) / f));
  }
  const auto j = nlohmann::json::parse(slurp(fs::path(out) / "summary.json"));
  CHECK(j["treated"] == "treated land");
  CHECK(j["intervention"] == 1990.0);
  CHECK(j["counterfactual_post"].size() == 13);
  for (const auto& [label, w] : j["weights"].items()) CHECK(w.get<double>() >= 0.0);
  CHECK(slurp(fs::path(out) / "series.csv").rfind("time,actual,counterfactual,gap\n", 0) == 0);
}

TEST_CASE("long layout gives the same fit") {
  const auto a = ws().out("fit_wide");
  const auto b = ws().out("fit_long");
  REQUIRE(cli(fit_args("fit", a)).code == 0);
  auto args = fit_args("fit", b);
  args[2] = ws().longp;
  args.insert(args.end(), {"--layout", "long"});
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(fs::path(a) / "series.csv") == slurp(fs::path(b) / "series.csv"));
}

TEST_CASE("usage errors exit with 64") {
  CHECK(cli({"fit", "--input", ws().wide, "--t0", "1990"}).code == 64);
  CHECK(cli({"frobnicate"}).code == 64);
  CHECK(cli({}).code == 64);
  auto args = fit_args("fit", ws().out("x"));
  args.push_back("--no-such-flag");
  CHECK(cli(args).code == 64);
  args = fit_args("fit", ws().out("x"));
  args.insert(args.end(), {"--kernel", "box"});
  CHECK(cli(args).code == 64);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("validation errors exit with 1") {
  auto args = fit_args("fit", ws().out("x"));
  args[2] = ws().out("missing.csv");
  const auto r = cli(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("cannot open") != std::string::npos);
  args = fit_args("fit", ws().out("x"));
  args[6] = "1990.5";
  CHECK(cli(args).code == 1);
  args = fit_args("fit", ws().out("x"));
  args[4] = "atlantis";
  CHECK(cli(args).code == 1);
}

TEST_CASE("numerical failures exit with 2") {
  // Squared values overflow in the covariance surface.
  rpsc::Panel huge = oracle::demo_panel();
  huge.values *= 1e200;
  const auto path = ws().out("huge.csv");
  oracle::write_csv(path, huge);
  auto args = fit_args("fit", ws().out("x"));
  args[2] = path;
  const auto r = cli(args);
  CHECK(r.code == 2);
  CHECK(r.err.find("FPCA") != std::string::npos);
}

TEST_CASE("config file fills options and flags win") {
  const auto cfg = ws().out("run.cfg");
  std::ofstream(cfg) << "# restarts and seed\nrestarts = 5\nseed=11\nzero-dual-init = true\nk-max=3\n";
  const auto out = ws().out("cfg");
  auto args = fit_args("fit", out);
  args.insert(args.end(), {"--config", cfg, "--k-max", "4"});
  REQUIRE(cli(args).code == 0);
  const auto j = nlohmann::json::parse(slurp(fs::path(out) / "summary.json"));
  CHECK(j["config"]["restarts"] == 5);
  CHECK(j["config"]["seed"] == 11);
  CHECK(j["config"]["rpca"]["zero_dual_init"] == true);
  CHECK(j["config"]["k_max"].get<int>() <= 4);
  CHECK(slurp(fs::path(out) / "tune.csv").find("\n4,") != std::string::npos);

  const auto bad = ws().out("bad.cfg");
  std::ofstream(bad) << "colour=blue\n";
  args = fit_args("fit", out);
  args.insert(args.end(), {"--config", bad});
  CHECK(cli(args).code == 64);
}

TEST_CASE("evaluation subcommands") {
  const auto t = ws().out("ptime");
  auto args = fit_args("placebo-time", t);
  args.insert(args.end(), {"--fake-t0", "1975"});
  REQUIRE(cli(args).code == 0);
  CHECK(fs::exists(fs::path(t) / "series.csv"));

  const auto s = ws().out("pspace");
  const auto rs = cli(fit_args("placebo-space", s));
  REQUIRE(rs.code == 0);
  CHECK(slurp(fs::path(s) / "ratios.csv").rfind("unit,pre_rmspe,post_rmspe,ratio\n", 0) == 0);
  CHECK(rs.out.find("treated ratio is the maximum: yes") != std::string::npos);

  const auto l = ws().out("loo");
  REQUIRE(cli(fit_args("loo", l)).code == 0);
  CHECK(slurp(fs::path(l) / "loo.csv").rfind("dropped_unit,time,counterfactual\n", 0) == 0);
}

TEST_CASE("report subcommands") {
  const auto f = ws().out("fpca");
  REQUIRE(cli({"fpca-report", "--input", ws().wide, "--t0", "1990", "--out", f}).code == 0);
  for (const char* name : {"fpca.csv", "scree.csv", "scores.csv", "fpca.json"}) CHECK(fs::exists(fs::path(f) / name));

  const auto s = ws().out("spectrum");
  REQUIRE(cli({"spectrum", "--input", ws().wide, "--out", s}).code == 0);
  CHECK(slurp(fs::path(s) / "spectrum.csv").rfind("index,singular_value,cumulative\n", 0) == 0);
}

TEST_CASE("simulate writes the study table") {
  const auto out = ws().out("sim");
  const auto r = cli({"simulate", "--sigma2", "1", "--seed", "7", "--n1", "20", "--n2", "15", "--t-max", "60",
                      "--t0", "40", "--out", out});
  REQUIRE(r.code == 0);
  const auto table = slurp(fs::path(out) / "study.csv");
  CHECK(table.rfind("sigma2,variant,pre_rmspe,post_rmspe,clustering_accuracy\n1,full,", 0) == 0);
  CHECK(table.find("\n1,missing,") != std::string::npos);
  CHECK(fs::exists(fs::path(out) / "sim_series.csv"));
}
