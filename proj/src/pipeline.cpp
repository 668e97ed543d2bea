#include "scorelab/pipeline.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "scorelab/kernels.hpp"
#include "scorelab/numerics.hpp"

namespace scorelab {

namespace {

const GaussianMixture::Component& single_component(const ScoreOracle& oracle) {
  if (oracle.base().components().size() != 1)
    throw std::invalid_argument("affine_score_of: base must be a single Gaussian");
  return oracle.base().components().front();
}

Eigen::MatrixXd kou_forcing(double h, int d) {
  const double decay = std::exp(-h);
  const double force_x = -decay * exp_tail2(h);
  const double force_v = h * decay;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * d, d);
  b.topRows(d).diagonal().setConstant(force_x);
  b.bottomRows(d).diagonal().setConstant(force_v);
  return b;
}

void check_pd(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "propagate: covariance lost positive-definiteness (unstable configuration)");
}

}  // namespace

AffineScore affine_score_of(const ScoreOracle& oracle, Process process, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("affine_score_of: forward time must be positive");
  if (oracle.kind() == OracleKind::isotropic_noise)
    throw std::invalid_argument(
        "affine_score_of: isotropic_noise oracle is not affine in the state");
  const auto& comp = single_component(oracle);
  const int d = oracle.base().dim();

  AffineScore a;
  if (process == Process::ou) {
    const double contraction = std::exp(-s);
    const double cov_scale = std::exp(-2.0 * s);
    const double fade = one_minus_exp_neg(2.0 * s);
    const Eigen::MatrixXd p =
        cov_scale * symmetrized(comp.cov) + fade * Eigen::MatrixXd::Identity(d, d);
    const Eigen::LLT<Eigen::MatrixXd> llt(p);
    const Eigen::MatrixXd p_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    a.gain = 2.0 * (Eigen::MatrixXd::Identity(d, d) - p_inv);
    a.offset = 2.0 * (p_inv * (contraction * comp.mean));
  } else {
    const Eigen::MatrixXd phi = kou_expm(s, d).transpose();
    Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(2 * d);
    mean0.head(d) = comp.mean;
    Eigen::MatrixXd cov0 = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    cov0.topLeftCorner(d, d) = symmetrized(comp.cov);
    const Eigen::VectorXd mean_s = phi * mean0;
    const Eigen::MatrixXd p = symmetrized(phi * cov0 * phi.transpose()) + kou_cov(s, d);
    const Eigen::LLT<Eigen::MatrixXd> llt(p);
    const Eigen::MatrixXd p_inv = llt.solve(Eigen::MatrixXd::Identity(2 * d, 2 * d));
    a.gain = 4.0 * (Eigen::MatrixXd::Identity(2 * d, 2 * d) - p_inv).bottomRows(d);
    a.offset = 4.0 * (p_inv * mean_s).tail(d);
  }

  switch (oracle.kind()) {
    case OracleKind::exact:
      break;
    case OracleKind::absolute_bias:
      a.offset += oracle.epsilon() * oracle.direction();
      break;
    case OracleKind::relative_scaling:
      a.gain *= (1.0 + oracle.rho());
      a.offset *= (1.0 + oracle.rho());
      break;
    case OracleKind::isotropic_noise:
      break;  // rejected above
  }
  return a;
}

GaussianState data_state(const RunConfig& config, double t) {
  if (config.oracle.base().components().size() != 1)
    throw std::invalid_argument("data_state: base must be a single Gaussian");
  const GaussianMixture base = config.process == Process::ou
                                   ? config.oracle.base()
                                   : tensor_with_standard(config.oracle.base());
  const GaussianMixture evolved =
      t > 0.0 ? (config.process == Process::ou ? ou_pushforward(base, t)
                                               : kou_pushforward(base, t))
              : base;
  const auto& c = evolved.components().front();
  return GaussianState{c.mean, symmetrized(c.cov)};
}

GaussianState propagate(const RunConfig& config) { return propagate(config, nullptr); }

GaussianState propagate(const RunConfig& config, std::ostream* trace) {
  if (config.schedule.n_steps() < 1) throw std::invalid_argument("propagate: schedule has no steps");
  if (!(config.early_stop_delta >= 0.0))
    throw std::invalid_argument("propagate: early_stop_delta must be nonnegative");
  if (!(config.early_stop_delta < config.schedule.steps.back()))
    throw std::invalid_argument("propagate: early_stop_delta must be smaller than the final step");
  single_component(config.oracle);

  const int d = config.oracle.base().dim();
  const int n = config.process == Process::ou ? d : 2 * d;
  const int n_steps = config.schedule.n_steps();
  const double horizon = config.schedule.horizon;

  GaussianState state{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)};
  if (trace) *trace << "k,t_k,mean_norm,cov_frobenius,kl_to_data\n";

  for (int k = 0; k < n_steps; ++k) {
    const double s = horizon - config.schedule.knots[static_cast<std::size_t>(k)];
    const AffineScore a = affine_score_of(config.oracle, config.process, s);
    double h = config.schedule.steps[static_cast<std::size_t>(k)];
    if (k == n_steps - 1) h -= config.early_stop_delta;

    if (config.process == Process::ou) {
      const double decay = std::exp(-h);
      const double gain = one_minus_exp_neg(h);
      const Eigen::MatrixXd m = decay * Eigen::MatrixXd::Identity(n, n) + gain * a.gain;
      state.mean = m * state.mean + gain * a.offset;
      state.cov = symmetrized(m * state.cov * m.transpose()) +
                  one_minus_exp_neg(2.0 * h) * Eigen::MatrixXd::Identity(n, n);
    } else {
      const Eigen::MatrixXd b = kou_forcing(h, d);
      const Eigen::MatrixXd m = kou_expm(h, d) + b * a.gain;
      state.mean = m * state.mean + b * a.offset;
      state.cov = symmetrized(m * state.cov * m.transpose()) + kou_backward_cov(h, d);
    }
    check_pd(state.cov);

    if (trace) {
      const double kl = kl_gaussian(data_state(config, 0.0), state);
      trace->precision(17);
      *trace << (k + 1) << ',' << config.schedule.knots[static_cast<std::size_t>(k + 1)] << ','
             << state.mean.norm() << ',' << state.cov.norm() << ',' << kl << "\n";
    }
  }
  return state;
}

double kl_gaussian(const GaussianState& p, const GaussianState& q) {
  const Eigen::Index n = p.mean.size();
  if (q.mean.size() != n || p.cov.rows() != n || q.cov.rows() != n)
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt_q(symmetrized(q.cov));
  if (llt_q.info() != Eigen::Success)
    throw std::invalid_argument("kl_gaussian: reference covariance not positive-definite");
  Eigen::LLT<Eigen::MatrixXd> llt_p(symmetrized(p.cov));
  if (llt_p.info() != Eigen::Success)
    throw std::invalid_argument("kl_gaussian: covariance not positive-definite");

  auto log_det = [n](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double acc = 0.0;
    const Eigen::MatrixXd lower = llt.matrixL();
    for (Eigen::Index i = 0; i < n; ++i) acc += std::log(lower(i, i));
    return 2.0 * acc;
  };

  const double trace_term = llt_q.solve(p.cov).trace();
  const Eigen::VectorXd diff = q.mean - p.mean;
  const double quad = diff.dot(llt_q.solve(diff));
  return 0.5 * (trace_term + quad - static_cast<double>(n) + log_det(llt_q) - log_det(llt_p));
}

double pipeline_kl(const RunConfig& config) {
  const GaussianState target = data_state(config, config.early_stop_delta);
  const GaussianState final_state = propagate(config);
  return kl_gaussian(target, final_state);
}

}  // namespace scorelab
