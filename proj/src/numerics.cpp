#include "scorelab/numerics.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scorelab {

double one_minus_exp_neg(double y) { return -std::expm1(-y); }

double exp_tail2(double y) {
  if (std::abs(y) >= 0.5) return std::expm1(y) - y;
  // sum_{k>=2} y^k / k!
  double term = y * y / 2.0;
  double acc = term;
  for (int k = 3; k < 32; ++k) {
    term *= y / k;
    acc += term;
    if (std::abs(term) < 1e-18 * std::abs(acc)) break;
  }
  return acc;
}

double exp_tail3(double y) {
  if (std::abs(y) >= 0.5) return std::expm1(y) - y - 0.5 * y * y;
  double term = y * y * y / 6.0;
  double acc = term;
  for (int k = 4; k < 32; ++k) {
    term *= y / k;
    acc += term;
    if (std::abs(term) < 1e-18 * std::abs(acc)) break;
  }
  return acc;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

Eigen::MatrixXd chol_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd jittered = m;
  jittered.diagonal().array() += 1e-14;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw std::runtime_error("chol_spd: matrix is not positive semi-definite within 1e-14 jitter");
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

namespace {

// Golub-Welsch: eigen-decomposition of the symmetric tridiagonal Jacobi
// matrix; weights are mu0 * (first eigenvector component)^2.
Quadrature golub_welsch(const Eigen::VectorXd& sub, double mu0) {
  const int n = static_cast<int>(sub.size()) + 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Quadrature q;
  q.nodes = es.eigenvalues();
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    q.weights[i] = mu0 * v0 * v0;
  }
  return q;
}

}  // namespace

Quadrature gauss_hermite_normal(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_normal: order must be >= 1");
  if (n == 1) return Quadrature{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(k / 2.0);
  // Physicists' rule (weight e^{-x^2}); substituting z = sqrt(2) x turns it
  // into the N(0,1) expectation rule, and mu0 = sqrt(pi) cancels so the
  // normalized weights are exactly the squared first components.
  Quadrature q = golub_welsch(sub, 1.0);
  q.nodes *= std::sqrt(2.0);
  return q;
}

Quadrature gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("gauss_legendre: requires hi > lo");
  Quadrature q;
  if (n == 1) {
    q.nodes = Eigen::VectorXd::Zero(1);
    q.weights = Eigen::VectorXd::Constant(1, 2.0);
  } else {
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    q = golub_welsch(sub, 2.0);
  }
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  q.nodes = (q.nodes.array() * half + mid).matrix();
  q.weights *= half;
  return q;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("ols_fit: needs >= 2 equally sized samples");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate abscissa (all x equal)");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

void MeanVar::push(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void MeanVar::merge(const MeanVar& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double delta = other.mean_ - mean_;
  const double nt = na + nb;
  mean_ += delta * nb / nt;
  m2_ += other.m2_ + delta * delta * na * nb / nt;
  n_ += other.n_;
}

double MeanVar::variance() const {
  if (n_ < 2) return 0.0;
  return m2_ / static_cast<double>(n_ - 1);
}

double MeanVar::std_error() const {
  if (n_ < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(n_));
}

}  // namespace scorelab
