#pragma once
// Shared numeric kernels: cancellation-safe exponential differences,
// log-sum-exp, SPD Cholesky with a bounded jitter retry, Gauss-Hermite /
// Gauss-Legendre rules, least squares, and a Welford accumulator.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace scorelab {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// 1 - e^{-y}; exact at y = 0, no cancellation for small y.
double one_minus_exp_neg(double y);

// e^y - 1 - y. Series below |y| < 0.5, closed form otherwise.
double exp_tail2(double y);

// e^y - 1 - y - y^2/2.
double exp_tail3(double y);

double log_sum_exp(const Eigen::VectorXd& v);

// Lower Cholesky factor of a symmetric positive-(semi)definite matrix.
// Retries once with a 1e-14 diagonal jitter; throws if that still fails.
Eigen::MatrixXd chol_spd(const Eigen::MatrixXd& m);

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

struct Quadrature {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Rule for E[f(Z)], Z ~ N(0,1); weights sum to 1.
Quadrature gauss_hermite_normal(int n);

// Legendre rule on [lo, hi]; weights sum to hi - lo.
Quadrature gauss_legendre(int n, double lo, double hi);

// Shortest round-trip decimal form (std::to_chars); "nan"/"inf" pass through.
std::string format_double(double v);

struct OlsFit {
  double slope;
  double intercept;
  double r2;
};

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

// Streaming mean/variance; merge order is the caller's responsibility and
// determines the (deterministic) floating-point result.
class MeanVar {
 public:
  void push(double x);
  void merge(const MeanVar& other);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;   // sample variance, 0 when n < 2
  double std_error() const;  // sqrt(variance / n), 0 when n < 2

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace scorelab
