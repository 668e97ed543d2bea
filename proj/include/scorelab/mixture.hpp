#pragma once
// Gaussian mixtures with closed-form log-density, score and Hessian, the
// exact pushforwards under both forward processes, and the information
// summary (relative Fisher, relative entropy, second moment).

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "scorelab/rng.hpp"

namespace scorelab {

class GaussianMixture {
 public:
  struct Component {
    double weight;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
  };

  // Validates: nonempty, equal dims, strictly positive weights summing to 1
  // within 1e-12, covariances symmetric within 1e-12 and positive-definite.
  explicit GaussianMixture(std::vector<Component> components);

  static GaussianMixture standard(int d);
  static GaussianMixture single(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  int dim() const { return dim_; }
  const std::vector<Component>& components() const { return components_; }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const;

  // score(x) + x: the gradient of the log-density relative to the standard
  // Gaussian. Vanishes identically when the mixture is standard.
  Eigen::VectorXd relative_score(const Eigen::VectorXd& x) const;

  Eigen::VectorXd sample(Rng& rng) const;

 private:
  int dim_ = 0;
  std::vector<Component> components_;
  // Caches, fixed at construction: lower Cholesky factors, log-weights plus
  // Gaussian normalizations, and precision matrices.
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<Eigen::MatrixXd> precision_;
  std::vector<double> log_weight_norm_;

  Eigen::VectorXd component_log_terms(const Eigen::VectorXd& x) const;
};

// Component i maps to (w_i, e^{-t} m_i, e^{-2t} S_i + (1 - e^{-2t}) I).
GaussianMixture ou_pushforward(const GaussianMixture& mix, double t);

// Input must be a 2d-dimensional (position, velocity) mixture; components
// are pushed through the forward kinetic kernel (map kou_expm(t)^T, noise
// kou_cov(t)). Callers build the product-with-standard initialization via
// tensor_with_standard.
GaussianMixture kou_pushforward(const GaussianMixture& mix, double t);

// mu (x) standard: appends an independent standard Gaussian velocity block.
GaussianMixture tensor_with_standard(const GaussianMixture& mix);

struct InfoSummary {
  double fisher_rel_gauss = 0.0;
  double kl_rel_gauss = 0.0;
  double second_moment = 0.0;
  double fisher_std_error = 0.0;
  double kl_std_error = 0.0;
};

// Fisher information and KL relative to the standard Gaussian, plus the
// (analytic) second moment. Tensorized composite Gauss-Legendre with a
// two-order consistency check for dim <= 2; Monte Carlo with the ||x||^2
// control variate above that.
InfoSummary info_summary(const GaussianMixture& mix, std::uint64_t seed = 0x5ca1ab1e,
                         int mc_budget = 200000);

// {"dim": d, "components": [{"weight": w, "mean": [...], "cov": [[...]]}]}.
// Round-trip is bit-faithful for finite doubles.
nlohmann::json mixture_to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const nlohmann::json& j);

}  // namespace scorelab
