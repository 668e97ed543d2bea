#ifndef SCORELAB_KERNELS_HPP
#define SCORELAB_KERNELS_HPP

// Exact conditional laws of the two forward processes over a time gap:
// affine map plus Gaussian noise. The kinetic closed forms are derived in
// docs/kinetic-kernel.md; a numeric matrix exponential and an adaptive
// quadrature serve as independent oracles in the test suite.

#include <Eigen/Dense>

#include <string>

#include "scorelab/rng.hpp"

namespace scorelab {

struct AffineGaussianKernel {
  Eigen::MatrixXd map;        // deterministic contraction
  Eigen::VectorXd offset;     // zero for both processes; kept for reuse
  Eigen::MatrixXd noise_cov;  // symmetric PSD
  double gap = 0.0;
  Eigen::MatrixXd noise_chol;  // lower factor, cached at construction
};

// x' = e^{-t} x + sqrt(1 - e^{-2t}) xi. gap = 0 yields (I, 0).
AffineGaussianKernel ou_kernel(double t, int d);

// e^{-A t} for the block matrix A = [[0, I], [-I, 2I]]; (A - I) is
// nilpotent, so per (x, v) pair the blocks are e^{-t} [[1+t, -t], [t, 1-t]].
Eigen::MatrixXd kou_expm(double t, int d);

// Noise covariance accumulated by the kinetic forward dynamics
// dX = V dt, dV = -(X + 2V) dt + 2 dB over a gap t (blocks below).
Eigen::MatrixXd kou_cov(double t, int d);

// Noise covariance of the time-reversed propagator e^{-A t}; equals the
// forward covariance conjugated by the velocity flip diag(I, -I).
Eigen::MatrixXd kou_backward_cov(double t, int d);

// Forward kinetic kernel: map = kou_expm(t)^T (the generator of the
// forward dynamics is -A^T), noise_cov = kou_cov(t).
AffineGaussianKernel kou_kernel(double t, int d);

// map * x0 + offset + chol(noise_cov) * xi. gap = 0 returns x0 exactly and
// consumes no randomness.
Eigen::VectorXd sample_transition(const AffineGaussianKernel& kernel,
                                  const Eigen::VectorXd& x0, Rng& rng);

// Plain-text layout: "gap=<t>" line, then "map:", matrix rows space-separated,
// then "noise_cov:" likewise. Rows end with '\n'.
std::string describe(const AffineGaussianKernel& kernel);

// Scalar 2x2 block coefficients, shared with the kinetic integrator.
struct KouExpmBlocks {
  double xx, xv, vx, vv;  // e^{-t}(1+t), -t e^{-t}, t e^{-t}, e^{-t}(1-t)
};
KouExpmBlocks kou_expm_blocks(double t);

struct KouCovBlocks {
  double xx;  // 1 - e^{-2t}(2t^2 + 2t + 1)
  double xv;  // 2 t^2 e^{-2t}; forward sign (backward negates)
  double vv;  // 1 - e^{-2t}(2t^2 - 2t + 1)
};
KouCovBlocks kou_cov_blocks(double t);

}  // namespace scorelab

#endif  // SCORELAB_KERNELS_HPP
