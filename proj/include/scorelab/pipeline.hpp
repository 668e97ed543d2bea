#pragma once
// Exact moment propagation for Gaussian data: every in-scope oracle except
// isotropic_noise is affine in the state, so the backward chain maps
// Gaussians to Gaussians and the final KL against the data is closed form.
// This is the repository's ground-truth instrument for end-to-end bounds.

#include <Eigen/Dense>

#include <iosfwd>

#include "scorelab/sampler.hpp"

namespace scorelab {

// s_tilde(s, u) = gain * u + offset.
struct AffineScore {
  Eigen::MatrixXd gain;
  Eigen::VectorXd offset;
};

struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Closed-form oracle response for a single-Gaussian base N(m, S).
// Position process: P_s = e^{-2s} S + (1 - e^{-2s}) I, gain = 2(I - P_s^{-1}),
// offset = 2 P_s^{-1} e^{-s} m. Kinetic: the velocity rows of the evolved
// joint Gaussian, gain = 4 [0 I](I - P^{-1}) (d x 2d), offset = 4 [0 I] P^{-1} mu_s.
// isotropic_noise is rejected: its frozen shift is not affine in the state
// across a batch with shared randomness.
AffineScore affine_score_of(const ScoreOracle& oracle, Process process, double s);

// Exact law of the sampler chain under the config; initialized at the
// standard Gaussian, early stopping shortens the final step with the score
// still frozen at the left endpoint (mirroring run()).
GaussianState propagate(const RunConfig& config);

// Same, streaming a "k,t_k,mean_norm,cov_frobenius,kl_to_data" CSV trace.
GaussianState propagate(const RunConfig& config, std::ostream* trace);

// 0.5 (tr(Cq^{-1} Cp) + (mq - mp)^T Cq^{-1} (mq - mp) - n + logdet Cq - logdet Cp).
double kl_gaussian(const GaussianState& p, const GaussianState& q);

// KL(data | final law). With early stopping the reference is the data
// smoothed over delta (position process) or its kinetic analog, matching
// what the stopped chain approximates.
double pipeline_kl(const RunConfig& config);

// The data distribution in state space: the base itself (position process)
// or base (x) standard velocity (kinetic), optionally smoothed over time t.
GaussianState data_state(const RunConfig& config, double t);

}  // namespace scorelab
