#pragma once
// Independent cross-checks for the test suite: finite differences against
// closed-form derivatives, RK4 moment flows against exact kernels, and
// plain Euler-Maruyama forward integrators. Nothing here reuses the code
// paths under test.

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "scorelab/rng.hpp"

namespace scorelab::testing {

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step = 1e-5);

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double step = 1e-4);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// RK4 integration of the affine-SDE moment equations
// dm/dt = M m + b, dC/dt = M C + C M^T + D over [0, t].
Moments moment_flow(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, const Eigen::MatrixXd& D,
                    const Moments& init, double t, int steps);

Moments sample_moments(const std::vector<Eigen::VectorXd>& xs);

// One forward path by Euler-Maruyama with `steps` substeps over [0, t].
// dX = -X dt + sqrt(2) dB.
Eigen::VectorXd em_forward_ou(Eigen::VectorXd x, double t, int steps, Rng& rng);
// dX = V dt, dV = -(X + 2V) dt + 2 dB; state (x, v).
Eigen::VectorXd em_forward_kou(Eigen::VectorXd xv, double t, int steps, Rng& rng);

}  // namespace scorelab::testing
