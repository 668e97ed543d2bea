#include "scorelab/mixture.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "scorelab/kernels.hpp"
#include "scorelab/numerics.hpp"

namespace scorelab {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kSymTol = 1e-12;

double half_dim_log2pi(int d) { return 0.5 * static_cast<double>(d) * kLog2Pi; }

}  // namespace

GaussianMixture::GaussianMixture(std::vector<Component> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("GaussianMixture: component list is empty");
  dim_ = static_cast<int>(components_[0].mean.size());
  if (dim_ < 1) throw std::invalid_argument("GaussianMixture: dimension must be positive");

  double weight_sum = 0.0;
  chol_.reserve(components_.size());
  precision_.reserve(components_.size());
  log_weight_norm_.reserve(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Component& c = components_[i];
    const std::string tag = "GaussianMixture component " + std::to_string(i);
    if (!(c.weight > 0.0)) throw std::invalid_argument(tag + ": weight must be strictly positive");
    if (c.mean.size() != dim_) throw std::invalid_argument(tag + ": mean dimension mismatch");
    if (c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw std::invalid_argument(tag + ": covariance shape mismatch");
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > kSymTol)
      throw std::invalid_argument(tag + ": covariance not symmetric within 1e-12");
    weight_sum += c.weight;

    Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(c.cov));
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(tag + ": covariance not positive-definite");
    Eigen::MatrixXd lower = llt.matrixL();
    double log_det_half = 0.0;
    for (int k = 0; k < dim_; ++k) log_det_half += std::log(lower(k, k));
    chol_.push_back(std::move(lower));
    precision_.push_back(llt.solve(Eigen::MatrixXd::Identity(dim_, dim_)));
    log_weight_norm_.push_back(std::log(c.weight) - half_dim_log2pi(dim_) - log_det_half);
  }
  if (std::abs(weight_sum - 1.0) > kWeightTol)
    throw std::invalid_argument("GaussianMixture: weights must sum to 1 within 1e-12");
}

GaussianMixture GaussianMixture::standard(int d) {
  return single(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  std::vector<Component> comps;
  comps.push_back(Component{1.0, std::move(mean), std::move(cov)});
  return GaussianMixture(std::move(comps));
}

Eigen::VectorXd GaussianMixture::component_log_terms(const Eigen::VectorXd& x) const {
  Eigen::VectorXd terms(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Eigen::VectorXd centered = x - components_[i].mean;
    const Eigen::VectorXd y = chol_[i].triangularView<Eigen::Lower>().solve(centered);
    terms[static_cast<Eigen::Index>(i)] = log_weight_norm_[i] - 0.5 * y.squaredNorm();
  }
  return terms;
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("log_density: point dimension mismatch");
  return log_sum_exp(component_log_terms(x));
}

Eigen::VectorXd GaussianMixture::score(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("score: point dimension mismatch");
  const Eigen::VectorXd terms = component_log_terms(x);
  const double lse = log_sum_exp(terms);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double r = std::exp(terms[static_cast<Eigen::Index>(i)] - lse);
    s.noalias() -= r * (precision_[i] * (x - components_[i].mean));
  }
  return s;
}

Eigen::MatrixXd GaussianMixture::hessian_log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("hessian_log_density: point dimension mismatch");
  const Eigen::VectorXd terms = component_log_terms(x);
  const double lse = log_sum_exp(terms);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double r = std::exp(terms[static_cast<Eigen::Index>(i)] - lse);
    const Eigen::VectorXd g = -(precision_[i] * (x - components_[i].mean));
    h.noalias() += r * (g * g.transpose() - precision_[i]);
    s += r * g;
  }
  h.noalias() -= s * s.transpose();
  return h;
}

Eigen::VectorXd GaussianMixture::relative_score(const Eigen::VectorXd& x) const {
  return score(x) + x;
}

Eigen::VectorXd GaussianMixture::sample(Rng& rng) const {
  std::size_t idx = components_.size() - 1;
  if (components_.size() > 1) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      cum += components_[i].weight;
      if (u <= cum) {
        idx = i;
        break;
      }
    }
  }
  const Eigen::VectorXd z = rng.normal_vector(dim_);
  return components_[idx].mean + chol_[idx] * z;
}

GaussianMixture ou_pushforward(const GaussianMixture& mix, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_pushforward: time must be nonnegative");
  if (t == 0.0) return mix;
  const int d = mix.dim();
  const double contraction = std::exp(-t);
  const double cov_scale = std::exp(-2.0 * t);
  const double fade = one_minus_exp_neg(2.0 * t);
  std::vector<GaussianMixture::Component> comps;
  comps.reserve(mix.components().size());
  for (const auto& c : mix.components()) {
    comps.push_back({c.weight, contraction * c.mean,
                     cov_scale * c.cov + fade * Eigen::MatrixXd::Identity(d, d)});
  }
  return GaussianMixture(std::move(comps));
}

GaussianMixture kou_pushforward(const GaussianMixture& mix, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("kou_pushforward: time must be nonnegative");
  if (mix.dim() % 2 != 0)
    throw std::invalid_argument(
        "kou_pushforward: mixture dimension must be even (position-velocity state)");
  if (t == 0.0) return mix;
  const int d = mix.dim() / 2;
  const Eigen::MatrixXd phi = kou_expm(t, d).transpose();
  const Eigen::MatrixXd noise = kou_cov(t, d);
  std::vector<GaussianMixture::Component> comps;
  comps.reserve(mix.components().size());
  for (const auto& c : mix.components()) {
    comps.push_back(
        {c.weight, phi * c.mean, symmetrized(phi * c.cov * phi.transpose()) + noise});
  }
  return GaussianMixture(std::move(comps));
}

GaussianMixture tensor_with_standard(const GaussianMixture& mix) {
  const int d = mix.dim();
  std::vector<GaussianMixture::Component> comps;
  comps.reserve(mix.components().size());
  for (const auto& c : mix.components()) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2 * d);
    mean.head(d) = c.mean;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    cov.topLeftCorner(d, d) = c.cov;
    comps.push_back({c.weight, std::move(mean), std::move(cov)});
  }
  return GaussianMixture(std::move(comps));
}

namespace {

// Relative log-density log p - log gamma; written so that the standard
// mixture yields an exact 0 (same addends, commuted).
double relative_log_density(const GaussianMixture& mix, const Eigen::VectorXd& x) {
  const double ref = -0.5 * x.squaredNorm() - half_dim_log2pi(mix.dim());
  return mix.log_density(x) - ref;
}

struct IntegrandPair {
  double fisher = 0.0;
  double kl = 0.0;
};

// Composite Gauss-Legendre expectation over the mixture: per component,
// averages f(mean + L z) against the standard normal density over
// z in [-10, 10]^d using unit-width panels. Unlike Gauss-Hermite, the
// per-panel rate is set by the distance of the integrand's complex
// singularities (zeros of the mixture density) from the real axis, so
// log-density integrands converge geometrically; truncation at |z| = 10
// contributes below 1e-21 of the mass.
IntegrandPair gl_pass(const GaussianMixture& mix, int nodes_per_panel) {
  constexpr double kRadius = 10.0;
  constexpr int kPanels = 20;
  std::vector<double> zs, ws;
  zs.reserve(kPanels * nodes_per_panel);
  ws.reserve(kPanels * nodes_per_panel);
  for (int p = 0; p < kPanels; ++p) {
    const double lo = -kRadius + 2.0 * kRadius * p / kPanels;
    const Quadrature q = gauss_legendre(nodes_per_panel, lo, lo + 2.0 * kRadius / kPanels);
    for (int i = 0; i < nodes_per_panel; ++i) {
      zs.push_back(q.nodes[i]);
      ws.push_back(q.weights[i] *
                   std::exp(-0.5 * q.nodes[i] * q.nodes[i] - 0.5 * kLog2Pi));
    }
  }
  const int n = static_cast<int>(zs.size());
  IntegrandPair acc;
  const int d = mix.dim();
  for (const auto& c : mix.components()) {
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(c.cov));
    const Eigen::MatrixXd lower = llt.matrixL();
    IntegrandPair local;
    if (d == 1) {
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = c.mean + lower * Eigen::VectorXd::Constant(1, zs[i]);
        local.fisher += ws[i] * mix.relative_score(x).squaredNorm();
        local.kl += ws[i] * relative_log_density(mix, x);
      }
    } else {
      Eigen::VectorXd z(2);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          z[0] = zs[i];
          z[1] = zs[j];
          const Eigen::VectorXd x = c.mean + lower * z;
          const double w = ws[i] * ws[j];
          local.fisher += w * mix.relative_score(x).squaredNorm();
          local.kl += w * relative_log_density(mix, x);
        }
      }
    }
    acc.fisher += c.weight * local.fisher;
    acc.kl += c.weight * local.kl;
  }
  return acc;
}

}  // namespace

InfoSummary info_summary(const GaussianMixture& mix, std::uint64_t seed, int mc_budget) {
  InfoSummary info;
  for (const auto& c : mix.components())
    info.second_moment += c.weight * (c.mean.squaredNorm() + c.cov.trace());

  if (mix.dim() <= 2) {
    const IntegrandPair prev = gl_pass(mix, 12);
    const IntegrandPair cur = gl_pass(mix, 18);
    const double df = std::abs(cur.fisher - prev.fisher);
    const double dk = std::abs(cur.kl - prev.kl);
    const auto tol = [](double v) { return std::max(1e-9, 1e-9 * std::abs(v)); };
    if (df > tol(cur.fisher) || dk > tol(cur.kl))
      throw std::runtime_error(
          "info_summary: quadrature tolerance unreachable at the configured order budget");
    info.fisher_rel_gauss = cur.fisher;
    info.kl_rel_gauss = cur.kl;
    info.fisher_std_error = df;
    info.kl_std_error = dk;
  } else {
    if (mc_budget < 1000)
      throw std::invalid_argument("info_summary: Monte Carlo budget must be >= 1000");
    Rng rng(substream_seed(seed, "info-summary", 0));
    const double n = static_cast<double>(mc_budget);
    double sf = 0, sk = 0, sh = 0, sff = 0, skk = 0, shh = 0, sfh = 0, skh = 0;
    for (int i = 0; i < mc_budget; ++i) {
      const Eigen::VectorXd x = mix.sample(rng);
      const double f = mix.relative_score(x).squaredNorm();
      const double k = relative_log_density(mix, x);
      const double h = x.squaredNorm() - info.second_moment;  // mean-zero control variate
      sf += f;
      sk += k;
      sh += h;
      sff += f * f;
      skk += k * k;
      shh += h * h;
      sfh += f * h;
      skh += k * h;
    }
    const double mf = sf / n, mk = sk / n, mh = sh / n;
    const double var_h = shh / n - mh * mh;
    const double cov_fh = sfh / n - mf * mh;
    const double cov_kh = skh / n - mk * mh;
    const double bf = var_h > 0 ? cov_fh / var_h : 0.0;
    const double bk = var_h > 0 ? cov_kh / var_h : 0.0;
    info.fisher_rel_gauss = mf - bf * mh;
    info.kl_rel_gauss = mk - bk * mh;
    const double var_f = sff / n - mf * mf - bf * cov_fh;
    const double var_k = skk / n - mk * mk - bk * cov_kh;
    info.fisher_std_error = std::sqrt(std::max(0.0, var_f) / n);
    info.kl_std_error = std::sqrt(std::max(0.0, var_k) / n);
  }

  const double slack =
      1e-9 + 3.0 * (info.kl_std_error + 0.5 * info.fisher_std_error);
  if (info.kl_rel_gauss > 0.5 * info.fisher_rel_gauss + slack)
    throw std::runtime_error("info_summary: log-Sobolev consistency check failed");
  return info;
}

nlohmann::json mixture_to_json(const GaussianMixture& mix) {
  nlohmann::json j;
  j["dim"] = mix.dim();
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : mix.components()) {
    nlohmann::json jc;
    jc["weight"] = c.weight;
    jc["mean"] = std::vector<double>(c.mean.begin(), c.mean.end());
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < c.cov.rows(); ++r) {
      std::vector<double> row(c.cov.cols());
      for (int col = 0; col < c.cov.cols(); ++col) row[static_cast<std::size_t>(col)] = c.cov(r, col);
      rows.push_back(row);
    }
    jc["cov"] = rows;
    comps.push_back(jc);
  }
  j["components"] = comps;
  return j;
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  if (!j.contains("dim") || !j["dim"].is_number_integer())
    throw std::invalid_argument("mixture_from_json: field 'dim' missing or not an integer");
  if (!j.contains("components") || !j["components"].is_array() || j["components"].empty())
    throw std::invalid_argument("mixture_from_json: field 'components' missing or empty");
  const int d = j["dim"].get<int>();
  std::vector<GaussianMixture::Component> comps;
  for (const auto& jc : j["components"]) {
    GaussianMixture::Component c;
    if (!jc.contains("weight") || !jc["weight"].is_number())
      throw std::invalid_argument("mixture_from_json: component field 'weight' missing");
    c.weight = jc["weight"].get<double>();
    const auto mean = jc.value("mean", std::vector<double>{});
    if (static_cast<int>(mean.size()) != d)
      throw std::invalid_argument("mixture_from_json: component field 'mean' has wrong length");
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    if (!jc.contains("cov") || !jc["cov"].is_array() || static_cast<int>(jc["cov"].size()) != d)
      throw std::invalid_argument("mixture_from_json: component field 'cov' has wrong shape");
    c.cov.resize(d, d);
    for (int r = 0; r < d; ++r) {
      const auto row = jc["cov"][static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != d)
        throw std::invalid_argument("mixture_from_json: component field 'cov' has wrong shape");
      for (int col = 0; col < d; ++col) c.cov(r, col) = row[static_cast<std::size_t>(col)];
    }
    comps.push_back(std::move(c));
  }
  return GaussianMixture(std::move(comps));
}

}  // namespace scorelab
