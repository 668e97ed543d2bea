#pragma once
// Score inputs for the backward samplers: the exact relative score of the
// evolved data mixture, plus wrappers that inject a controlled error
// (constant bias, frozen isotropic noise, relative scaling).

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "scorelab/mixture.hpp"
#include "scorelab/schedule.hpp"

namespace scorelab {

enum class OracleKind { exact, absolute_bias, isotropic_noise, relative_scaling };

struct OracleQuery {
  double forward_time = 0.0;  // must be > 0
  Eigen::VectorXd point;      // x (position process) or (x, v) (kinetic)
};

class ScoreOracle {
 public:
  static ScoreOracle exact(GaussianMixture base);
  // ||direction|| must be 1 within 1e-12.
  static ScoreOracle absolute_bias(GaussianMixture base, double epsilon,
                                   Eigen::VectorXd direction);
  static ScoreOracle isotropic_noise(GaussianMixture base, double epsilon,
                                     std::uint64_t noise_seed);
  static ScoreOracle relative_scaling(GaussianMixture base, double rho);

  OracleKind kind() const { return kind_; }
  const GaussianMixture& base() const { return base_; }
  double epsilon() const { return epsilon_; }
  double rho() const { return rho_; }
  const Eigen::VectorXd& direction() const { return direction_; }
  std::uint64_t noise_seed() const { return noise_seed_; }

  // 2 * (score of the evolved base at x, relative to standard) + wrapper.
  Eigen::VectorXd eval_ou(const OracleQuery& q) const;
  // 4 * (velocity block of the relative score of the evolved base (x) std).
  Eigen::VectorXd eval_kou(const OracleQuery& q) const;

  // Evolved marginals, memoized per forward time (shared across threads).
  const GaussianMixture& pushed_ou(double s) const;
  const GaussianMixture& pushed_kou(double s) const;

  // The frozen noise vector added by the isotropic_noise kind at forward
  // time s: (epsilon / sqrt(d)) * zeta(noise_seed, s). Constant within a
  // step and across paths; bitwise deterministic.
  Eigen::VectorXd noise_shift(double s) const;

  ScoreOracle(const ScoreOracle& other);
  ScoreOracle& operator=(const ScoreOracle&) = delete;

 private:
  ScoreOracle(OracleKind kind, GaussianMixture base);

  OracleKind kind_;
  GaussianMixture base_;
  double epsilon_ = 0.0;
  double rho_ = 0.0;
  Eigen::VectorXd direction_;
  std::uint64_t noise_seed_ = 0;

  Eigen::VectorXd wrap(Eigen::VectorXd target, double s) const;

  struct Cache {
    std::shared_mutex mutex;
    std::map<std::uint64_t, std::unique_ptr<GaussianMixture>> entries;
  };
  mutable Cache ou_cache_;
  mutable Cache kou_cache_;
  mutable std::unique_ptr<GaussianMixture> kou_base_;  // base (x) standard, lazy
  mutable std::shared_mutex kou_base_mutex_;
};

struct RealizedError {
  std::vector<double> absolute_mse;    // per step index k = 0..N-1
  std::vector<double> absolute_se;
  std::vector<double> relative_ratio;  // mse / E||target||^2
  std::vector<double> ratio_se;
};

// Monte-Carlo measurement of the oracle's error against the exact target at
// each step's query time, sampling states from the analytic forward
// marginal. Constant-shift kinds (exact / absolute_bias / isotropic_noise)
// have a deterministic difference and are evaluated in closed form with
// zero standard error.
RealizedError realized_error(const ScoreOracle& oracle, const Schedule& schedule,
                             Process process, int n_samples, Rng& rng);

}  // namespace scorelab
