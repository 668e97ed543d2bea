#include "scorelab/oracle.hpp"

#include <bit>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "scorelab/numerics.hpp"

namespace scorelab {

ScoreOracle::ScoreOracle(OracleKind kind, GaussianMixture base)
    : kind_(kind), base_(std::move(base)) {}

ScoreOracle::ScoreOracle(const ScoreOracle& other)
    : kind_(other.kind_),
      base_(other.base_),
      epsilon_(other.epsilon_),
      rho_(other.rho_),
      direction_(other.direction_),
      noise_seed_(other.noise_seed_) {}  // caches start empty

ScoreOracle ScoreOracle::exact(GaussianMixture base) {
  return ScoreOracle(OracleKind::exact, std::move(base));
}

ScoreOracle ScoreOracle::absolute_bias(GaussianMixture base, double epsilon,
                                       Eigen::VectorXd direction) {
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("ScoreOracle::absolute_bias: epsilon must be nonnegative");
  if (direction.size() != base.dim())
    throw std::invalid_argument("ScoreOracle::absolute_bias: direction dimension mismatch");
  if (std::abs(direction.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("ScoreOracle::absolute_bias: direction must be unit within 1e-12");
  ScoreOracle o(OracleKind::absolute_bias, std::move(base));
  o.epsilon_ = epsilon;
  o.direction_ = std::move(direction);
  return o;
}

ScoreOracle ScoreOracle::isotropic_noise(GaussianMixture base, double epsilon,
                                         std::uint64_t noise_seed) {
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("ScoreOracle::isotropic_noise: epsilon must be nonnegative");
  ScoreOracle o(OracleKind::isotropic_noise, std::move(base));
  o.epsilon_ = epsilon;
  o.noise_seed_ = noise_seed;
  return o;
}

ScoreOracle ScoreOracle::relative_scaling(GaussianMixture base, double rho) {
  ScoreOracle o(OracleKind::relative_scaling, std::move(base));
  o.rho_ = rho;
  return o;
}

const GaussianMixture& ScoreOracle::pushed_ou(double s) const {
  const std::uint64_t key = std::bit_cast<std::uint64_t>(s);
  {
    std::shared_lock lock(ou_cache_.mutex);
    auto it = ou_cache_.entries.find(key);
    if (it != ou_cache_.entries.end()) return *it->second;
  }
  std::unique_lock lock(ou_cache_.mutex);
  auto& slot = ou_cache_.entries[key];
  if (!slot) slot = std::make_unique<GaussianMixture>(ou_pushforward(base_, s));
  return *slot;
}

const GaussianMixture& ScoreOracle::pushed_kou(double s) const {
  {
    std::shared_lock lock(kou_base_mutex_);
    if (!kou_base_) {
      lock.unlock();
      std::unique_lock wlock(kou_base_mutex_);
      if (!kou_base_) kou_base_ = std::make_unique<GaussianMixture>(tensor_with_standard(base_));
    }
  }
  const std::uint64_t key = std::bit_cast<std::uint64_t>(s);
  {
    std::shared_lock lock(kou_cache_.mutex);
    auto it = kou_cache_.entries.find(key);
    if (it != kou_cache_.entries.end()) return *it->second;
  }
  std::unique_lock lock(kou_cache_.mutex);
  auto& slot = kou_cache_.entries[key];
  if (!slot) slot = std::make_unique<GaussianMixture>(kou_pushforward(*kou_base_, s));
  return *slot;
}

Eigen::VectorXd ScoreOracle::noise_shift(double s) const {
  const int d = base_.dim();
  Rng rng(substream_seed(noise_seed_, "iso-noise", std::bit_cast<std::uint64_t>(s)));
  return (epsilon_ / std::sqrt(static_cast<double>(d))) * rng.normal_vector(d);
}

Eigen::VectorXd ScoreOracle::wrap(Eigen::VectorXd target, double s) const {
  switch (kind_) {
    case OracleKind::exact:
      return target;
    case OracleKind::absolute_bias:
      return target + epsilon_ * direction_;
    case OracleKind::isotropic_noise:
      return target + noise_shift(s);
    case OracleKind::relative_scaling:
      return (1.0 + rho_) * target;
  }
  throw std::logic_error("ScoreOracle: unknown kind");
}

Eigen::VectorXd ScoreOracle::eval_ou(const OracleQuery& q) const {
  if (!(q.forward_time > 0.0))
    throw std::invalid_argument("eval_ou: forward_time must be positive");
  if (q.point.size() != base_.dim())
    throw std::invalid_argument("eval_ou: point dimension mismatch");
  const GaussianMixture& evolved = pushed_ou(q.forward_time);
  return wrap(2.0 * evolved.relative_score(q.point), q.forward_time);
}

Eigen::VectorXd ScoreOracle::eval_kou(const OracleQuery& q) const {
  if (!(q.forward_time > 0.0))
    throw std::invalid_argument("eval_kou: forward_time must be positive");
  const int d = base_.dim();
  if (q.point.size() != 2 * d)
    throw std::invalid_argument("eval_kou: point must have position-velocity dimension 2d");
  const GaussianMixture& evolved = pushed_kou(q.forward_time);
  const Eigen::VectorXd full_score = evolved.score(q.point);
  const Eigen::VectorXd v_relative = full_score.tail(d) + q.point.tail(d);
  return wrap(4.0 * v_relative, q.forward_time);
}

namespace {

Eigen::VectorXd exact_target(const ScoreOracle& oracle, Process process, double s,
                             const Eigen::VectorXd& x) {
  if (process == Process::ou) return 2.0 * oracle.pushed_ou(s).relative_score(x);
  const int d = oracle.base().dim();
  const Eigen::VectorXd full_score = oracle.pushed_kou(s).score(x);
  return 4.0 * (full_score.tail(d) + x.tail(d));
}

}  // namespace

RealizedError realized_error(const ScoreOracle& oracle, const Schedule& schedule,
                             Process process, int n_samples, Rng& rng) {
  if (n_samples < 1000)
    throw std::invalid_argument("realized_error: n_samples must be >= 1000");
  const int n_steps = schedule.n_steps();
  RealizedError out;
  out.absolute_mse.resize(n_steps);
  out.absolute_se.resize(n_steps);
  out.relative_ratio.resize(n_steps);
  out.ratio_se.resize(n_steps);

  for (int k = 0; k < n_steps; ++k) {
    const double s = schedule.horizon - schedule.knots[static_cast<std::size_t>(k)];
    if (oracle.kind() == OracleKind::exact) {
      out.absolute_mse[k] = 0.0;
      out.absolute_se[k] = 0.0;
      out.relative_ratio[k] = 0.0;
      out.ratio_se[k] = 0.0;
      continue;
    }
    const GaussianMixture& marginal =
        process == Process::ou ? oracle.pushed_ou(s) : oracle.pushed_kou(s);
    MeanVar target_norm;
    for (int i = 0; i < n_samples; ++i) {
      const Eigen::VectorXd x = marginal.sample(rng);
      target_norm.push(exact_target(oracle, process, s, x).squaredNorm());
    }
    const double denom = target_norm.mean();
    const double denom_se = target_norm.std_error();

    switch (oracle.kind()) {
      case OracleKind::absolute_bias: {
        const double mse = (oracle.epsilon() * oracle.direction()).squaredNorm();
        out.absolute_mse[k] = mse;
        out.absolute_se[k] = 0.0;
        out.relative_ratio[k] = denom > 1e-300 ? mse / denom : 0.0;
        out.ratio_se[k] = denom > 1e-300 ? mse * denom_se / (denom * denom) : 0.0;
        break;
      }
      case OracleKind::isotropic_noise: {
        const double mse = oracle.noise_shift(s).squaredNorm();
        out.absolute_mse[k] = mse;
        out.absolute_se[k] = 0.0;
        out.relative_ratio[k] = denom > 1e-300 ? mse / denom : 0.0;
        out.ratio_se[k] = denom > 1e-300 ? mse * denom_se / (denom * denom) : 0.0;
        break;
      }
      case OracleKind::relative_scaling: {
        const double rho2 = oracle.rho() * oracle.rho();
        out.absolute_mse[k] = rho2 * denom;
        out.absolute_se[k] = rho2 * denom_se;
        // The estimator's numerator and denominator share every sample, so
        // the ratio is rho^2 with no Monte Carlo error of its own.
        out.relative_ratio[k] = denom > 1e-300 ? (rho2 * denom) / denom : 0.0;
        out.ratio_se[k] = 0.0;
        break;
      }
      case OracleKind::exact:
        break;
    }
  }
  return out;
}

}  // namespace scorelab
