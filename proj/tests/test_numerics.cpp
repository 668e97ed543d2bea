#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "scorelab/numerics.hpp"

using namespace scorelab;

TEST_CASE("log(2 pi) constant") {
  CHECK(kLog2Pi == doctest::Approx(std::log(2.0 * std::acos(-1.0))).epsilon(1e-15));
}

TEST_CASE("one_minus_exp_neg matches direct form away from zero") {
  for (double y : {0.3, 1.0, 4.0, 30.0})
    CHECK(one_minus_exp_neg(y) == doctest::Approx(1.0 - std::exp(-y)).epsilon(1e-14));
}

TEST_CASE("one_minus_exp_neg near zero") {
  CHECK(one_minus_exp_neg(0.0) == 0.0);
  const double y = 1e-9;
  // leading terms y - y^2/2; naive evaluation would lose ~7 digits
  CHECK(one_minus_exp_neg(y) == doctest::Approx(y - y * y / 2.0).epsilon(1e-13));
  CHECK(one_minus_exp_neg(-1e-9) == doctest::Approx(-1e-9 - 0.5e-18).epsilon(1e-13));
}

TEST_CASE("exp_tail2 / exp_tail3 against direct evaluation") {
  for (double y : {-2.0, -0.7, 0.7, 2.0, 5.0}) {
    CHECK(exp_tail2(y) == doctest::Approx(std::expm1(y) - y).epsilon(1e-12));
    CHECK(exp_tail3(y) == doctest::Approx(std::expm1(y) - y - y * y / 2.0).epsilon(5e-12));
  }
}

TEST_CASE("exp_tail2 / exp_tail3 small-argument expansions") {
  for (double y : {1e-3, -1e-3, 1e-6, -1e-6}) {
    CHECK(exp_tail2(y) ==
          doctest::Approx(y * y / 2.0 + y * y * y / 6.0 + y * y * y * y / 24.0).epsilon(1e-12));
    CHECK(exp_tail3(y) ==
          doctest::Approx(y * y * y / 6.0 + y * y * y * y / 24.0).epsilon(1e-10));
  }
  CHECK(exp_tail2(0.0) == 0.0);
  CHECK(exp_tail3(0.0) == 0.0);
}

TEST_CASE("log_sum_exp stability and values") {
  Eigen::VectorXd v(3);
  v << 0.0, std::log(2.0), std::log(3.0);
  CHECK(log_sum_exp(v) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  Eigen::VectorXd big(2);
  big << 1000.0, 1000.5;
  CHECK(log_sum_exp(big) ==
        doctest::Approx(1000.5 + std::log1p(std::exp(-0.5))).epsilon(1e-14));
}

TEST_CASE("chol_spd reconstructs and survives a PSD edge") {
  Eigen::MatrixXd a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  const Eigen::MatrixXd l = chol_spd(a);
  CHECK((l * l.transpose() - a).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(l(0, 1) == 0.0);

  Eigen::MatrixXd psd(2, 2);
  psd << 1.0, 1.0, 1.0, 1.0;  // rank one: fails plain LLT, passes with jitter
  const Eigen::MatrixXd lp = chol_spd(psd);
  CHECK((lp * lp.transpose() - psd).norm() < 1e-6);

  Eigen::MatrixXd neg(1, 1);
  neg << -1.0;
  CHECK_THROWS_WITH_AS(chol_spd(neg),
                       "chol_spd: matrix is not positive semi-definite within 1e-14 jitter",
                       std::runtime_error);
}

TEST_CASE("gauss_hermite_normal integrates Gaussian moments exactly") {
  const Quadrature q = gauss_hermite_normal(8);
  CHECK(q.weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  double m2 = 0.0, m4 = 0.0, m6 = 0.0;
  for (Eigen::Index i = 0; i < q.nodes.size(); ++i) {
    const double x = q.nodes[i], w = q.weights[i];
    m2 += w * x * x;
    m4 += w * x * x * x * x;
    m6 += w * std::pow(x, 6);
  }
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("gauss_legendre basics") {
  const Quadrature q2 = gauss_legendre(2, 0.0, 1.0);
  double cubic = 0.0;
  for (Eigen::Index i = 0; i < 2; ++i) cubic += q2.weights[i] * std::pow(q2.nodes[i], 3);
  CHECK(cubic == doctest::Approx(0.25).epsilon(1e-14));

  const double pi = std::acos(-1.0);
  const Quadrature q = gauss_legendre(16, 0.0, pi);
  CHECK(q.weights.sum() == doctest::Approx(pi).epsilon(1e-13));
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * std::sin(q.nodes[i]);
  CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("ols_fit on an exact line") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> y{-2.0, 1.0, 4.0, 7.0};
  const OlsFit fit = ols_fit(x, y);
  CHECK(fit.slope == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(fit.intercept == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ols_fit({1.0, 1.0}, {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ols_fit({1.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("MeanVar push and merge agree") {
  MeanVar full, left, right;
  double direct_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = std::sin(0.1 * i) + 0.01 * i;
    full.push(x);
    (i < 37 ? left : right).push(x);
    direct_sum += x;
  }
  MeanVar merged = left;
  merged.merge(right);
  CHECK(merged.count() == 100);
  CHECK(merged.mean() == doctest::Approx(full.mean()).epsilon(1e-13));
  CHECK(merged.variance() == doctest::Approx(full.variance()).epsilon(1e-12));
  CHECK(full.mean() == doctest::Approx(direct_sum / 100.0).epsilon(1e-13));
  CHECK(full.std_error() ==
        doctest::Approx(std::sqrt(full.variance() / 100.0)).epsilon(1e-13));

  MeanVar empty;
  CHECK(empty.variance() == 0.0);
  CHECK(empty.std_error() == 0.0);
}

TEST_CASE("format_double round-trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("symmetrized") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 4.0, 3.0;
  const Eigen::MatrixXd s = symmetrized(m);
  CHECK(s(0, 1) == 3.0);
  CHECK(s(1, 0) == 3.0);
  CHECK(s(0, 0) == 1.0);
}
