#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpsc/error.hpp"
#include "rpsc/sim.hpp"

#include <numbers>

using namespace rpsc;

TEST_CASE("process means at hand-evaluated points") {
  CHECK(f1_mean(10.0, 250.0) == doctest::Approx(3.0).epsilon(1e-14));
  const double x = 1.0 / std::numbers::pi;
  CHECK(f2_mean(1.0) == doctest::Approx(4.0 * std::sin(x) + 4.0 * std::cos(x)));
  CHECK(f2_mean(1.0) == doctest::Approx(5.0509).epsilon(1e-4));
  // 13 mod 10 = 3
  CHECK(f1_mean(13.0, 250.0) == doctest::Approx(3.9 - 3.0 * std::sin(13.0 * x) + 3.0 * std::cos(13.0 * x)));
}

TEST_CASE("generated panel layout") {
  SimConfig cfg;
  cfg.n1 = 5;
  cfg.n2 = 4;
  const auto d = generate_processes(cfg, 1.0);
  CHECK(d.panel.units() == 10);
  CHECK(d.panel.periods() == 250);
  CHECK(d.panel.time_labels.front() == 1.0);
  CHECK(d.panel.time_labels.back() == 250.0);
  CHECK(*d.panel.treated == 9);
  CHECK(*d.panel.t0 == 150);
  CHECK(d.panel.unit_labels.back() == "truth");
  CHECK(d.panel.values.row(9) == d.f1_truth.transpose());
  CHECK(d.cohort == std::vector<int>{1, 1, 1, 1, 1, 2, 2, 2, 2});
}

TEST_CASE("noise has the requested variance") {
  SimConfig cfg;
  cfg.n1 = 50;
  cfg.n2 = 51;
  cfg.seed = 3;
  const auto d = generate_processes(cfg, 4.0);
  Matrix eps(101, 250);
  for (Eigen::Index i = 0; i < 101; ++i) {
    eps.row(i) = d.panel.values.row(i) - (i < 50 ? d.f1_truth : d.f2_truth).transpose();
  }
  const double mean = eps.mean();
  const double var = (eps.array() - mean).square().sum() / static_cast<double>(eps.size() - 1);
  CHECK(std::abs(var / 4.0 - 1.0) < 0.05);
}

TEST_CASE("noise levels share the same draws") {
  SimConfig cfg;
  cfg.n1 = 4;
  cfg.n2 = 3;
  const auto a = generate_processes(cfg, 1.0);
  const auto b = generate_processes(cfg, 9.0);
  const Matrix ea = a.panel.values.topRows(4).rowwise() - a.f1_truth.transpose();
  const Matrix eb = b.panel.values.topRows(4).rowwise() - b.f1_truth.transpose();
  CHECK((eb - 3.0 * ea).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("drop_missing masks an exact count of donor cells") {
  SimConfig cfg;
  cfg.n1 = 50;
  cfg.n2 = 50;
  const auto d = generate_processes(cfg, 1.0);
  CHECK(drop_missing(d.panel, 0.0, 1) == d.panel);
  const Panel m = drop_missing(d.panel, 0.3, 1);
  CHECK((!m.mask).count() == 7500);
  CHECK(m.mask.row(100).all());
  CHECK(drop_missing(d.panel, 0.3, 1) == m);
  CHECK_FALSE((drop_missing(d.panel, 0.3, 2).mask == m.mask).all());
  CHECK_THROWS_AS(drop_missing(d.panel, 1.0, 1), ValidationError);
}

TEST_CASE("clustering accuracy matches cohorts to clusters") {
  const std::vector<int> cohort{1, 1, 1, 2, 2};
  CHECK(clustering_accuracy({1, 1, 1, 0, 0}, cohort, 2) == 1.0);
  CHECK(clustering_accuracy({0, 0, 1, 1, 1}, cohort, 2) == doctest::Approx(0.8));
  CHECK(clustering_accuracy({0, 0, 0, 0, 0}, cohort, 2) == doctest::Approx(0.6));
  CHECK(clustering_accuracy({0, 0, 0, 2, 1}, cohort, 3) == doctest::Approx(0.8));
}

TEST_CASE("small study is reproducible and independent of job count") {
  SimConfig cfg;
  cfg.n1 = 20;
  cfg.n2 = 15;
  cfg.t_max = 60;
  cfg.t0 = 40;
  cfg.sigma2_list = {1.0, 4.0};
  cfg.seed = 5;
  const auto a = run_simulation_study(cfg);
  cfg.jobs = 4;
  const auto b = run_simulation_study(cfg);
  REQUIRE(a.size() == 4);
  CHECK(a[0].variant == "full");
  CHECK(a[1].variant == "missing");
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pre_rmspe == b[i].pre_rmspe);
    CHECK(a[i].post_rmspe == b[i].post_rmspe);
    CHECK(a[i].estimate == b[i].estimate);
    CHECK(a[i].clustering_accuracy == 1.0);
  }
}

TEST_CASE("invalid study settings") {
  SimConfig cfg;
  cfg.t0 = 250;
  CHECK_THROWS_AS(generate_processes(cfg, 1.0), ValidationError);
  SimConfig neg;
  neg.sigma2_list = {1.0, -1.0};
  CHECK_THROWS_AS(run_simulation_study(neg), ValidationError);
}
