#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

#include "scorelab/kernels.hpp"
#include "scorelab/numerics.hpp"
#include "support/test_oracles.hpp"

using namespace scorelab;

namespace {

// Generator of the kinetic contraction, A = [[0, I], [-I, 2I]].
Eigen::MatrixXd kinetic_a(int d) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  A.topRightCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  A.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  A.bottomRightCorner(d, d) = 2.0 * Eigen::MatrixXd::Identity(d, d);
  return A;
}

// Forward drift matrix M = -A^T and diffusion D = diag(0, 4I).
Eigen::MatrixXd kinetic_m(int d) { return -kinetic_a(d).transpose(); }

Eigen::MatrixXd kinetic_d(int d) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  D.bottomRightCorner(d, d) = 4.0 * Eigen::MatrixXd::Identity(d, d);
  return D;
}

// Independent covariance oracle: integrate e^{M u} D e^{M^T u} du over [0, t]
// by Gauss-Legendre, with the matrix exponential from the generic scaling-
// and-squaring implementation rather than the closed form under test.
Eigen::MatrixXd cov_by_quadrature(double t, int d, int nodes) {
  const Eigen::MatrixXd M = kinetic_m(d);
  const Eigen::MatrixXd D = kinetic_d(d);
  const Quadrature q = gauss_legendre(nodes, 0.0, t);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const Eigen::MatrixXd e = (q.nodes[i] * M).exp();
    acc += q.weights[i] * e * D * e.transpose();
  }
  return acc;
}

}  // namespace

TEST_CASE("position kernel closed form") {
  for (double t : {0.05, 0.3, 1.0, 4.0}) {
    const AffineGaussianKernel k = ou_kernel(t, 3);
    const double decay = std::exp(-t);
    const double var = 1.0 - std::exp(-2.0 * t);
    CHECK((k.map - decay * Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
    CHECK((k.noise_cov - var * Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-15);
    CHECK(k.offset.norm() == 0.0);
    CHECK(k.gap == t);
    // cached factor reproduces the covariance
    CHECK((k.noise_chol * k.noise_chol.transpose() - k.noise_cov).norm() <= 1e-14);
  }
}

TEST_CASE("zero-gap kernels are the identity") {
  const AffineGaussianKernel k0 = ou_kernel(0.0, 2);
  CHECK(k0.map.isIdentity(0.0));
  CHECK(k0.noise_cov.norm() == 0.0);
  const AffineGaussianKernel kk = kou_kernel(0.0, 2);
  CHECK(kk.map.isIdentity(0.0));
  CHECK(kk.noise_cov.norm() == 0.0);
}

TEST_CASE("kinetic propagator matches the numeric matrix exponential") {
  for (int d : {1, 3}) {
    const Eigen::MatrixXd A = kinetic_a(d);
    for (double t : {0.1, 0.5, 1.0, 3.0}) {
      const Eigen::MatrixXd numeric = (-t * A).exp();
      CHECK((kou_expm(t, d) - numeric).norm() <= 1e-12);
    }
  }
}

TEST_CASE("kinetic propagator block scalars") {
  // (A - I)^2 = 0 collapses the series: e^{-At} = e^{-t}(I + t(I - A)).
  for (double t : {1e-8, 0.2, 1.0, 5.0}) {
    const KouExpmBlocks b = kou_expm_blocks(t);
    const double e = std::exp(-t);
    CHECK(b.xx == doctest::Approx(e * (1.0 + t)).epsilon(1e-15));
    CHECK(b.xv == doctest::Approx(-e * t).epsilon(1e-15));
    CHECK(b.vx == doctest::Approx(e * t).epsilon(1e-15));
    CHECK(b.vv == doctest::Approx(e * (1.0 - t)).epsilon(1e-15));
    const Eigen::MatrixXd m = kou_expm(t, 2);
    CHECK(m(0, 0) == b.xx);
    CHECK(m(0, 2) == b.xv);
    CHECK(m(2, 0) == b.vx);
    CHECK(m(2, 2) == b.vv);
    CHECK(m(0, 1) == 0.0);  // cross-coordinate entries stay zero
  }
}

TEST_CASE("kinetic covariance matches quadrature") {
  for (double t : {0.1, 0.5, 1.0, 3.0}) {
    const Eigen::MatrixXd oracle = cov_by_quadrature(t, 2, 64);
    CHECK((kou_cov(t, 2) - oracle).norm() <= 1e-10);
  }
}

TEST_CASE("kinetic covariance closed-form blocks") {
  for (double t : {0.3, 1.0, 2.5}) {
    const KouCovBlocks b = kou_cov_blocks(t);
    const double e2 = std::exp(-2.0 * t);
    CHECK(b.xx == doctest::Approx(1.0 - e2 * (2 * t * t + 2 * t + 1)).epsilon(1e-13));
    CHECK(b.xv == doctest::Approx(2 * t * t * e2).epsilon(1e-13));
    CHECK(b.vv == doctest::Approx(1.0 - e2 * (2 * t * t - 2 * t + 1)).epsilon(1e-13));
    const Eigen::MatrixXd c = kou_cov(t, 2);
    CHECK(c(0, 0) == b.xx);
    CHECK(c(0, 2) == b.xv);
    CHECK(c(2, 2) == b.vv);
    CHECK(c(0, 1) == 0.0);
  }
}

TEST_CASE("kinetic covariance is stable and positive near zero gap") {
  // Naive 1 - e^{-2t}(...) cancels catastrophically; the implementation must
  // reproduce the series xx = (4/3)t^3 - 2t^4 + ..., xv = 2t^2 - 4t^3 + ...,
  // vv = 4t - 8t^2 + ... at tiny gaps.
  for (double t : {1e-7, 1e-5, 1e-3}) {
    const KouCovBlocks b = kou_cov_blocks(t);
    const double xx_series = (4.0 / 3.0) * t * t * t - 2.0 * t * t * t * t;
    const double xv_series = 2 * t * t - 4 * t * t * t + (10.0 / 3.0) * t * t * t * t;
    const double vv_series = 4 * t - 8 * t * t + 8 * t * t * t;
    CHECK(b.xx == doctest::Approx(xx_series).epsilon(1e-6));
    CHECK(b.xv == doctest::Approx(xv_series).epsilon(1e-6));
    CHECK(b.vv == doctest::Approx(vv_series).epsilon(1e-6));
  }
  for (double t : {1e-6, 1e-3, 0.1, 1.0, 10.0, 50.0}) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kou_cov(t, 2));
    CHECK(es.eigenvalues().minCoeff() >= -1e-14);
  }
}

TEST_CASE("kinetic covariance reaches the standard Gaussian") {
  CHECK((kou_cov(30.0, 2) - Eigen::MatrixXd::Identity(4, 4)).norm() <= 1e-12);
  CHECK(std::abs((1.0 - std::exp(-2.0 * 30.0)) - 1.0) <= 1e-12);
}

TEST_CASE("semigroup composition") {
  const double s = 0.3, t = 0.9;
  SUBCASE("position") {
    const AffineGaussianKernel ks = ou_kernel(s, 2), kt = ou_kernel(t, 2),
                               kst = ou_kernel(s + t, 2);
    CHECK((kst.map - kt.map * ks.map).norm() <= 1e-11);
    CHECK((kst.noise_cov - (kt.map * ks.noise_cov * kt.map.transpose() + kt.noise_cov)).norm() <=
          1e-11);
  }
  SUBCASE("kinetic") {
    const AffineGaussianKernel ks = kou_kernel(s, 2), kt = kou_kernel(t, 2),
                               kst = kou_kernel(s + t, 2);
    CHECK((kst.map - kt.map * ks.map).norm() <= 1e-11);
    CHECK((kst.noise_cov - (kt.map * ks.noise_cov * kt.map.transpose() + kt.noise_cov)).norm() <=
          1e-11);
  }
}

TEST_CASE("backward covariance is the velocity-flip conjugate") {
  const int d = 2;
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  J.bottomRightCorner(d, d) *= -1.0;
  for (double t : {0.2, 1.0, 4.0}) {
    const Eigen::MatrixXd fwd = kou_cov(t, d);
    const Eigen::MatrixXd bwd = kou_backward_cov(t, d);
    CHECK((bwd - J * fwd * J).norm() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bwd);
    CHECK(es.eigenvalues().minCoeff() >= -1e-14);
  }
}

TEST_CASE("kernel moments match an independent moment flow") {
  using testing::Moments;
  using testing::moment_flow;
  SUBCASE("position") {
    const int d = 2;
    Eigen::VectorXd x0(d);
    x0 << 1.3, -0.4;
    const Moments init{x0, Eigen::MatrixXd::Zero(d, d)};
    const Moments flowed = moment_flow(-Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d),
                                       2.0 * Eigen::MatrixXd::Identity(d, d), init, 0.7, 2000);
    const AffineGaussianKernel k = ou_kernel(0.7, d);
    CHECK((flowed.mean - k.map * x0).norm() <= 1e-10);
    CHECK((flowed.cov - k.noise_cov).norm() <= 1e-10);
  }
  SUBCASE("kinetic") {
    const int d = 1;
    Eigen::VectorXd z0(2 * d);
    z0 << 0.8, -1.1;
    const Moments init{z0, Eigen::MatrixXd::Zero(2 * d, 2 * d)};
    const Moments flowed =
        moment_flow(kinetic_m(d), Eigen::VectorXd::Zero(2 * d), kinetic_d(d), init, 0.7, 2000);
    const AffineGaussianKernel k = kou_kernel(0.7, d);
    CHECK((flowed.mean - k.map * z0).norm() <= 1e-10);
    CHECK((flowed.cov - k.noise_cov).norm() <= 1e-10);
  }
}

TEST_CASE("transition sampler") {
  SUBCASE("zero gap is exact and consumes no randomness") {
    Eigen::VectorXd x0(3);
    x0 << 0.5, -2.0, 1.5;
    Rng used(42), fresh(42);
    const Eigen::VectorXd out = sample_transition(ou_kernel(0.0, 3), x0, used);
    CHECK((out - x0).norm() == 0.0);
    CHECK(used.normal() == fresh.normal());
  }
  SUBCASE("sampled moments track the kernel") {
    const int d = 2;
    const double t = 0.5;
    const AffineGaussianKernel k = kou_kernel(t, d);
    Eigen::VectorXd z0(2 * d);
    z0 << 1.0, 0.0, 0.0, -1.0;
    Rng rng(substream_seed(7, "kernel-smoke", 0));
    std::vector<Eigen::VectorXd> xs;
    const int n = 20000;
    xs.reserve(n);
    for (int i = 0; i < n; ++i) xs.push_back(sample_transition(k, z0, rng));
    const testing::Moments m = testing::sample_moments(xs);
    const double se_scale = 4.0 / std::sqrt(static_cast<double>(n));
    CHECK((m.mean - k.map * z0).cwiseAbs().maxCoeff() <= se_scale * 1.2);
    CHECK((m.cov - k.noise_cov).cwiseAbs().maxCoeff() <= se_scale * 2.5);
  }
}

TEST_CASE("single Euler step agrees to first order") {
  // The kernel linearizes to I + h M with noise h D for small h.
  const int d = 1;
  const double h = 1e-3;
  const AffineGaussianKernel k = kou_kernel(h, d);
  CHECK((k.map - (Eigen::MatrixXd::Identity(2, 2) + h * kinetic_m(d))).norm() <= 5.0 * h * h);
  CHECK((k.noise_cov - h * kinetic_d(d)).norm() <= 10.0 * h * h);
}

TEST_CASE("describe layout") {
  const AffineGaussianKernel k = ou_kernel(0.25, 1);
  const std::string text = describe(k);
  CHECK(text.rfind("gap=0.25", 0) == 0);
  CHECK(text.find("map:") != std::string::npos);
  CHECK(text.find("noise_cov:") != std::string::npos);
  CHECK(text.back() == '\n');
  // the two numbers are round-trip doubles
  std::istringstream in(text.substr(text.find("map:") + 5));
  double mapval = 0.0;
  in >> mapval;
  CHECK(mapval == std::exp(-0.25));
}
