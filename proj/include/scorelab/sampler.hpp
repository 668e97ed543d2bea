#pragma once
// Exponential-integrator backward samplers. Each step freezes the score at
// the left endpoint and integrates the remaining linear SDE exactly; early
// stopping shortens the final step to land on horizon - delta while keeping
// the already-frozen score.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "scorelab/oracle.hpp"
#include "scorelab/schedule.hpp"

namespace scorelab {

struct RunConfig {
  Process process = Process::ou;
  Schedule schedule;
  ScoreOracle oracle;
  int n_paths = 1;
  std::uint64_t seed = 0;
  double early_stop_delta = 0.0;  // in [0, last step)
  int workers = 0;                // <= 0: hardware default
};

struct SampleBatch {
  std::vector<Eigen::VectorXd> points;       // one per path, in path order
  std::vector<std::uint64_t> path_seeds;     // substream seed ledger
};

// x' = e^{-h} x + (1 - e^{-h}) s_val + sqrt(1 - e^{-2h}) xi.
// h = 0 returns x unchanged and consumes no randomness.
Eigen::VectorXd ei_step_ou(const Eigen::VectorXd& x, const Eigen::VectorXd& s_val, double h,
                           Rng& rng);

// Exact integration of d(X,V) = A_b (X,V) dt + (0, s_val) dt + (0, 2) dB
// with A_b = [[0, -I], [I, -2I]]: propagator kou_expm(h), closed-form
// forcing (see kernels), noise covariance kou_backward_cov(h).
Eigen::VectorXd ei_step_kou(const Eigen::VectorXd& xv, const Eigen::VectorXd& s_val, double h,
                            Rng& rng);

// Runs the configured backward chain from the standard Gaussian with one
// deterministic substream per path. Bitwise reproducible for a fixed seed
// regardless of worker count.
SampleBatch run(const RunConfig& config);

// "path_index,x_0..x_{d-1}[,v_0..v_{d-1}]" with round-trip double formatting.
void write_batch_csv(const SampleBatch& batch, Process process, int d, std::ostream& out);

}  // namespace scorelab
