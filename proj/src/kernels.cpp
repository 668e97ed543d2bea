#include "scorelab/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scorelab/numerics.hpp"

namespace scorelab {

namespace {

void require_nonneg_gap(double t, const char* where) {
  if (!(t >= 0.0)) throw std::invalid_argument(std::string(where) + ": gap must be nonnegative");
}

void require_dim(int d, const char* where) {
  if (d < 1) throw std::invalid_argument(std::string(where) + ": dimension must be positive");
}

Eigen::MatrixXd assemble_blocks(int d, double xx, double xv, double vx, double vv) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  m.topLeftCorner(d, d).diagonal().setConstant(xx);
  m.topRightCorner(d, d).diagonal().setConstant(xv);
  m.bottomLeftCorner(d, d).diagonal().setConstant(vx);
  m.bottomRightCorner(d, d).diagonal().setConstant(vv);
  return m;
}

}  // namespace

AffineGaussianKernel ou_kernel(double t, int d) {
  require_nonneg_gap(t, "ou_kernel");
  require_dim(d, "ou_kernel");
  AffineGaussianKernel k;
  k.gap = t;
  k.offset = Eigen::VectorXd::Zero(d);
  if (t == 0.0) {
    k.map = Eigen::MatrixXd::Identity(d, d);
    k.noise_cov = Eigen::MatrixXd::Zero(d, d);
    k.noise_chol = Eigen::MatrixXd::Zero(d, d);
    return k;
  }
  const double contraction = std::exp(-t);
  const double var = one_minus_exp_neg(2.0 * t);
  k.map = contraction * Eigen::MatrixXd::Identity(d, d);
  k.noise_cov = var * Eigen::MatrixXd::Identity(d, d);
  k.noise_chol = std::sqrt(var) * Eigen::MatrixXd::Identity(d, d);
  return k;
}

KouExpmBlocks kou_expm_blocks(double t) {
  const double e = std::exp(-t);
  return KouExpmBlocks{e * (1.0 + t), -t * e, t * e, e * (1.0 - t)};
}

KouCovBlocks kou_cov_blocks(double t) {
  // Antiderivatives of the quadratic-in-r integrands; the tail forms keep
  // full relative accuracy at small t where the leading orders are
  // t^3 (xx), t^2 (xv) and t (vv).
  KouCovBlocks b;
  const double e2 = std::exp(-2.0 * t);
  b.xx = e2 * exp_tail3(2.0 * t);
  b.xv = 2.0 * t * t * e2;
  b.vv = -std::expm1(-4.0 * t) + e2 * exp_tail3(-2.0 * t);
  return b;
}

Eigen::MatrixXd kou_expm(double t, int d) {
  require_nonneg_gap(t, "kou_expm");
  require_dim(d, "kou_expm");
  const KouExpmBlocks b = kou_expm_blocks(t);
  return assemble_blocks(d, b.xx, b.xv, b.vx, b.vv);
}

Eigen::MatrixXd kou_cov(double t, int d) {
  require_nonneg_gap(t, "kou_cov");
  require_dim(d, "kou_cov");
  const KouCovBlocks b = kou_cov_blocks(t);
  return assemble_blocks(d, b.xx, b.xv, b.xv, b.vv);
}

Eigen::MatrixXd kou_backward_cov(double t, int d) {
  require_nonneg_gap(t, "kou_backward_cov");
  require_dim(d, "kou_backward_cov");
  const KouCovBlocks b = kou_cov_blocks(t);
  return assemble_blocks(d, b.xx, -b.xv, -b.xv, b.vv);
}

AffineGaussianKernel kou_kernel(double t, int d) {
  require_nonneg_gap(t, "kou_kernel");
  require_dim(d, "kou_kernel");
  AffineGaussianKernel k;
  k.gap = t;
  k.offset = Eigen::VectorXd::Zero(2 * d);
  if (t == 0.0) {
    k.map = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    k.noise_cov = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    k.noise_chol = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    return k;
  }
  k.map = kou_expm(t, d).transpose();
  k.noise_cov = kou_cov(t, d);
  k.noise_chol = chol_spd(k.noise_cov);
  return k;
}

Eigen::VectorXd sample_transition(const AffineGaussianKernel& kernel,
                                  const Eigen::VectorXd& x0, Rng& rng) {
  if (x0.size() != kernel.map.cols())
    throw std::invalid_argument("sample_transition: point dimension does not match kernel");
  if (kernel.gap == 0.0) return x0;
  const Eigen::VectorXd xi = rng.normal_vector(static_cast<int>(x0.size()));
  return kernel.map * x0 + kernel.offset + kernel.noise_chol * xi;
}

std::string describe(const AffineGaussianKernel& kernel) {
  std::ostringstream out;
  out.precision(17);
  out << "gap=" << kernel.gap << "\n";
  auto dump = [&out](const char* name, const Eigen::MatrixXd& m) {
    out << name << ":\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        out << m(r, c);
      }
      out << "\n";
    }
  };
  dump("map", kernel.map);
  dump("noise_cov", kernel.noise_cov);
  return out.str();
}

}  // namespace scorelab
