#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "scorelab/kernels.hpp"
#include "scorelab/sampler.hpp"
#include "support/test_oracles.hpp"

using namespace scorelab;

namespace {

GaussianMixture two_bumps() {
  return GaussianMixture({{0.5, Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Identity(1, 1)},
                          {0.5, Eigen::VectorXd::Constant(1, -2.0),
                           Eigen::MatrixXd::Identity(1, 1)}});
}

// The EI steps are affine in state, score, and noise. Running twice with the
// same substream cancels the noise term, which exposes the deterministic part
// for comparison against an independent RK4 moment flow.
Eigen::VectorXd step_difference(Process process, const Eigen::VectorXd& za,
                                const Eigen::VectorXd& zb, const Eigen::VectorXd& s_val,
                                double h) {
  Rng ra(12345), rb(12345);
  if (process == Process::ou)
    return ei_step_ou(za, s_val, h, ra) - ei_step_ou(zb, s_val, h, rb);
  return ei_step_kou(za, s_val, h, ra) - ei_step_kou(zb, s_val, h, rb);
}

Eigen::MatrixXd backward_drift_kinetic(int d) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  A.topRightCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  A.bottomLeftCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  A.bottomRightCorner(d, d) = -2.0 * Eigen::MatrixXd::Identity(d, d);
  return A;
}

}  // namespace

TEST_CASE("position step deterministic part matches the moment flow") {
  const int d = 2;
  const double h = 0.3;
  Eigen::VectorXd s_val(d), x0(d);
  s_val << 0.7, -1.1;
  x0 << 0.4, 1.6;

  // state map column i = step(x0 + e_i) - step(x0) under a shared substream
  Eigen::MatrixXd map(d, d);
  for (int i = 0; i < d; ++i)
    map.col(i) = step_difference(Process::ou, x0 + Eigen::VectorXd::Unit(d, i), x0, s_val, h);
  // forcing = step(0, s) - step(0, 0)
  Rng ra(7), rb(7);
  const Eigen::VectorXd forcing = ei_step_ou(Eigen::VectorXd::Zero(d), s_val, h, ra) -
                                  ei_step_ou(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d),
                                             h, rb);

  // independent reference: dm/dt = -(m - s_val), so M = -I, b = s_val
  const Eigen::MatrixXd M = -Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd D = 2.0 * Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < d; ++i) {
    const testing::Moments flow = testing::moment_flow(
        M, Eigen::VectorXd::Zero(d), D,
        {Eigen::VectorXd::Unit(d, i), Eigen::MatrixXd::Zero(d, d)}, h, 2000);
    CHECK((map.col(i) - flow.mean).norm() <= 1e-10);
  }
  const testing::Moments forced = testing::moment_flow(
      M, s_val, D, {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)}, h, 2000);
  CHECK((forcing - forced.mean).norm() <= 1e-10);
  // the noise covariance integrated by the same flow is (1 - e^{-2h}) I
  const testing::Moments diffused = testing::moment_flow(
      M, Eigen::VectorXd::Zero(d), D, {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)}, h,
      2000);
  CHECK((diffused.cov - (1.0 - std::exp(-2.0 * h)) * Eigen::MatrixXd::Identity(d, d)).norm() <=
        1e-10);
}

TEST_CASE("kinetic step deterministic part matches the moment flow") {
  const int d = 1;
  const double h = 0.4;
  Eigen::VectorXd s_val(d), z0(2 * d);
  s_val << 0.9;
  z0 << -0.3, 0.8;

  Eigen::MatrixXd map(2 * d, 2 * d);
  for (int i = 0; i < 2 * d; ++i)
    map.col(i) =
        step_difference(Process::kou, z0 + Eigen::VectorXd::Unit(2 * d, i), z0, s_val, h);
  Rng ra(7), rb(7);
  const Eigen::VectorXd forcing =
      ei_step_kou(Eigen::VectorXd::Zero(2 * d), s_val, h, ra) -
      ei_step_kou(Eigen::VectorXd::Zero(2 * d), Eigen::VectorXd::Zero(d), h, rb);

  const Eigen::MatrixXd M = backward_drift_kinetic(d);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  D.bottomRightCorner(d, d) = 4.0 * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * d);
  b.tail(d) = s_val;

  for (int i = 0; i < 2 * d; ++i) {
    const testing::Moments flow = testing::moment_flow(
        M, Eigen::VectorXd::Zero(2 * d), D,
        {Eigen::VectorXd::Unit(2 * d, i), Eigen::MatrixXd::Zero(2 * d, 2 * d)}, h, 2000);
    CHECK((map.col(i) - flow.mean).norm() <= 1e-10);
  }
  const testing::Moments forced = testing::moment_flow(
      M, b, D, {Eigen::VectorXd::Zero(2 * d), Eigen::MatrixXd::Zero(2 * d, 2 * d)}, h, 2000);
  CHECK((forcing - forced.mean).norm() <= 1e-10);
  const testing::Moments diffused = testing::moment_flow(
      M, Eigen::VectorXd::Zero(2 * d), D,
      {Eigen::VectorXd::Zero(2 * d), Eigen::MatrixXd::Zero(2 * d, 2 * d)}, h, 2000);
  CHECK((diffused.cov - kou_backward_cov(h, d)).norm() <= 1e-10);
  // the implementation's propagator is the closed-form exponential
  CHECK((map - kou_expm(h, d)).norm() <= 1e-12);
}

TEST_CASE("single-step sampling moments") {
  const int d = 1;
  const double h = 0.35;
  Eigen::VectorXd s_val(d), z0(2 * d);
  s_val << -0.6;
  z0 << 1.0, -0.5;
  Rng rng(substream_seed(3, "step-moments", 0));
  std::vector<Eigen::VectorXd> xs;
  const int n = 30000;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) xs.push_back(ei_step_kou(z0, s_val, h, rng));
  const testing::Moments m = testing::sample_moments(xs);
  // affine decomposition under a shared substream isolates map z0 + forcing
  Rng d1(2), d2(2);
  const Eigen::VectorXd mean_true =
      ei_step_kou(z0, s_val, h, d1) -
      ei_step_kou(Eigen::VectorXd::Zero(2 * d), Eigen::VectorXd::Zero(d), h, d2);
  const double se = 4.0 / std::sqrt(static_cast<double>(n));
  CHECK((m.mean - mean_true).cwiseAbs().maxCoeff() <= 1.5 * se);
  CHECK((m.cov - kou_backward_cov(h, d)).cwiseAbs().maxCoeff() <= 3.0 * se);
}

TEST_CASE("zero step is the identity and consumes no randomness") {
  Eigen::VectorXd x(2), s_val(2);
  x << 0.3, -0.9;
  s_val << 1.0, 1.0;
  Rng used(5), fresh(5);
  CHECK((ei_step_ou(x, s_val, 0.0, used) - x).norm() == 0.0);
  CHECK(used.normal() == fresh.normal());
  Eigen::VectorXd z(2), sv(1);
  z << 0.3, -0.9;
  sv << 1.0;
  Rng used2(5), fresh2(5);
  CHECK((ei_step_kou(z, sv, 0.0, used2) - z).norm() == 0.0);
  CHECK(used2.normal() == fresh2.normal());
}

TEST_CASE("step validation") {
  Eigen::VectorXd x(2), s2(2), s1(1);
  x.setZero();
  s2.setZero();
  s1.setZero();
  Rng rng(1);
  CHECK_THROWS_WITH_AS(ei_step_ou(x, s1, 0.1, rng), "ei_step_ou: score dimension mismatch",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ei_step_ou(x, s2, -0.1, rng), "ei_step_ou: step must be nonnegative",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ei_step_kou(Eigen::VectorXd::Zero(3), s1, 0.1, rng),
                       "ei_step_kou: state must have position-velocity dimension 2d",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ei_step_kou(x, s2, 0.1, rng), "ei_step_kou: score dimension mismatch",
                       std::invalid_argument);
}

TEST_CASE("standard data is a fixed point of the backward chain") {
  for (Process process : {Process::ou, Process::kou}) {
    const int d = 2;
    const int state_dim = process == Process::ou ? d : 2 * d;
    const RunConfig config{process,
                           make_constant_schedule(2.0, 0.25),
                           ScoreOracle::exact(GaussianMixture::standard(d)),
                           20000,
                           substream_seed(2025, "stationary", process == Process::ou ? 0 : 1),
                           0.0,
                           0};
    const SampleBatch batch = run(config);
    const testing::Moments m = testing::sample_moments(batch.points);
    const double se = 4.0 / std::sqrt(static_cast<double>(batch.points.size()));
    CHECK(m.mean.cwiseAbs().maxCoeff() <= 1.5 * se);
    CHECK((m.cov - Eigen::MatrixXd::Identity(state_dim, state_dim)).cwiseAbs().maxCoeff() <=
          3.0 * se);
  }
}

TEST_CASE("worker count never changes the output") {
  const RunConfig base{Process::kou,
                       make_constant_schedule(1.5, 0.25),
                       ScoreOracle::exact(two_bumps()),
                       500,
                       424242,
                       0.0,
                       1};
  const SampleBatch one = run(base);
  RunConfig wide = base;
  wide.workers = 8;
  const SampleBatch eight = run(wide);
  REQUIRE(one.points.size() == eight.points.size());
  for (std::size_t p = 0; p < one.points.size(); ++p) {
    CHECK((one.points[p] - eight.points[p]).norm() == 0.0);
    CHECK(one.path_seeds[p] == eight.path_seeds[p]);
  }
  CHECK(one.path_seeds[0] == substream_seed(424242, "path", 0));
  CHECK(one.path_seeds[7] == substream_seed(424242, "path", 7));
}

TEST_CASE("early stopping shortens only the final step") {
  RunConfig cfg{Process::ou,
                make_constant_schedule(2.0, 0.25),
                ScoreOracle::exact(two_bumps()),
                200,
                11,
                0.0,
                0};
  const SampleBatch full = run(cfg);
  cfg.early_stop_delta = 1e-9;
  const SampleBatch stopped = run(cfg);
  double max_diff = 0.0;
  for (std::size_t p = 0; p < full.points.size(); ++p)
    max_diff = std::max(max_diff, (full.points[p] - stopped.points[p]).norm());
  CHECK(max_diff > 0.0);      // the final gap really changed
  CHECK(max_diff <= 1e-6);    // continuously in delta
  cfg.early_stop_delta = 0.25;  // equals the final step
  CHECK_THROWS_WITH_AS(run(cfg), "run: early_stop_delta must be smaller than the final step",
                       std::invalid_argument);
  cfg.early_stop_delta = -1.0;
  CHECK_THROWS_WITH_AS(run(cfg), "run: early_stop_delta must be nonnegative",
                       std::invalid_argument);
}

TEST_CASE("batch CSV layout") {
  const RunConfig cfg{Process::kou,
                      make_constant_schedule(1.0, 0.5),
                      ScoreOracle::exact(two_bumps()),
                      3,
                      99,
                      0.0,
                      0};
  const SampleBatch batch = run(cfg);
  std::ostringstream out;
  write_batch_csv(batch, Process::kou, 1, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "path_index,x_0,v_0");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    CHECK(std::stoi(line.substr(0, comma)) == rows);
    // values round-trip to the stored doubles
    const auto second_comma = line.find(',', comma + 1);
    const double x0 = std::stod(line.substr(comma + 1, second_comma - comma - 1));
    const double v0 = std::stod(line.substr(second_comma + 1));
    CHECK(x0 == batch.points[static_cast<std::size_t>(rows)][0]);
    CHECK(v0 == batch.points[static_cast<std::size_t>(rows)][1]);
    ++rows;
  }
  CHECK(rows == 3);

  std::ostringstream out_ou;
  write_batch_csv(batch, Process::ou, 2, out_ou);  // header only depends on layout args
  CHECK(out_ou.str().rfind("path_index,x_0,x_1", 0) == 0);
}
