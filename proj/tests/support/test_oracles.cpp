#include "support/test_oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace scorelab::testing {

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    h(i, i) = (f(hi) - 2.0 * f0 + f(lo)) / (step * step);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp[i] += step; pp[j] += step;
      pm[i] += step; pm[j] -= step;
      mp[i] -= step; mp[j] += step;
      mm[i] -= step; mm[j] -= step;
      h(i, j) = h(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step * step);
    }
  }
  return h;
}

Moments moment_flow(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, const Eigen::MatrixXd& D,
                    const Moments& init, double t, int steps) {
  if (steps < 1) throw std::invalid_argument("moment_flow: steps must be positive");
  const double h = t / steps;
  Eigen::VectorXd m = init.mean;
  Eigen::MatrixXd c = init.cov;
  const auto fm = [&](const Eigen::VectorXd& mm) -> Eigen::VectorXd { return M * mm + b; };
  const auto fc = [&](const Eigen::MatrixXd& cc) -> Eigen::MatrixXd {
    return M * cc + cc * M.transpose() + D;
  };
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd k1 = fm(m), k2 = fm(m + 0.5 * h * k1), k3 = fm(m + 0.5 * h * k2),
                          k4 = fm(m + h * k3);
    const Eigen::MatrixXd c1 = fc(c), c2 = fc(c + 0.5 * h * c1), c3 = fc(c + 0.5 * h * c2),
                          c4 = fc(c + h * c3);
    m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    c += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
  }
  return Moments{m, c};
}

Moments sample_moments(const std::vector<Eigen::VectorXd>& xs) {
  if (xs.empty()) throw std::invalid_argument("sample_moments: empty sample");
  const Eigen::Index n = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const Eigen::VectorXd& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const Eigen::VectorXd& x : xs) {
    const Eigen::VectorXd d = x - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(xs.size() - 1);
  return Moments{mean, cov};
}

Eigen::VectorXd em_forward_ou(Eigen::VectorXd x, double t, int steps, Rng& rng) {
  const double h = t / steps;
  const double sn = std::sqrt(2.0 * h);
  for (int k = 0; k < steps; ++k) x += -h * x + sn * rng.normal_vector(static_cast<int>(x.size()));
  return x;
}

Eigen::VectorXd em_forward_kou(Eigen::VectorXd xv, double t, int steps, Rng& rng) {
  const int d = static_cast<int>(xv.size()) / 2;
  const double h = t / steps;
  const double sn = 2.0 * std::sqrt(h);
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd x = xv.head(d), v = xv.tail(d);
    xv.head(d) = x + h * v;
    xv.tail(d) = v - h * (x + 2.0 * v) + sn * rng.normal_vector(d);
  }
  return xv;
}

}  // namespace scorelab::testing
