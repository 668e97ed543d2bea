#include "scorelab/sampler.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "scorelab/kernels.hpp"
#include "scorelab/numerics.hpp"
#include "scorelab/parallel.hpp"

namespace scorelab {

Eigen::VectorXd ei_step_ou(const Eigen::VectorXd& x, const Eigen::VectorXd& s_val, double h,
                           Rng& rng) {
  if (!(h >= 0.0)) throw std::invalid_argument("ei_step_ou: step must be nonnegative");
  if (s_val.size() != x.size()) throw std::invalid_argument("ei_step_ou: score dimension mismatch");
  if (h == 0.0) return x;
  const double decay = std::exp(-h);
  const double gain = one_minus_exp_neg(h);
  const double noise_sd = std::sqrt(one_minus_exp_neg(2.0 * h));
  const Eigen::VectorXd xi = rng.normal_vector(static_cast<int>(x.size()));
  return decay * x + gain * s_val + noise_sd * xi;
}

Eigen::VectorXd ei_step_kou(const Eigen::VectorXd& xv, const Eigen::VectorXd& s_val, double h,
                            Rng& rng) {
  if (!(h >= 0.0)) throw std::invalid_argument("ei_step_kou: step must be nonnegative");
  if (xv.size() % 2 != 0)
    throw std::invalid_argument("ei_step_kou: state must have position-velocity dimension 2d");
  const int d = static_cast<int>(xv.size()) / 2;
  if (s_val.size() != d) throw std::invalid_argument("ei_step_kou: score dimension mismatch");
  if (h == 0.0) return xv;

  const KouExpmBlocks b = kou_expm_blocks(h);
  const double decay = std::exp(-h);
  const double force_x = -decay * exp_tail2(h);  // -(1 - e^{-h}(1 + h))
  const double force_v = h * decay;

  // Per-coordinate 2x2 Cholesky of the backward noise covariance
  // [[cxx, -cxv], [-cxv, cvv]].
  const KouCovBlocks c = kou_cov_blocks(h);
  const double l11 = std::sqrt(c.xx);
  const double l21 = l11 > 0.0 ? -c.xv / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, c.vv - l21 * l21));

  Eigen::VectorXd out(2 * d);
  for (int i = 0; i < d; ++i) {
    const double x = xv[i];
    const double v = xv[d + i];
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    out[i] = b.xx * x + b.xv * v + force_x * s_val[i] + l11 * z1;
    out[d + i] = b.vx * x + b.vv * v + force_v * s_val[i] + l21 * z1 + l22 * z2;
  }
  return out;
}

SampleBatch run(const RunConfig& config) {
  if (config.n_paths < 1) throw std::invalid_argument("run: n_paths must be >= 1");
  if (config.schedule.n_steps() < 1) throw std::invalid_argument("run: schedule has no steps");
  if (!(config.early_stop_delta >= 0.0))
    throw std::invalid_argument("run: early_stop_delta must be nonnegative");
  if (!(config.early_stop_delta < config.schedule.steps.back()))
    throw std::invalid_argument("run: early_stop_delta must be smaller than the final step");

  const int d = config.oracle.base().dim();
  const int state_dim = config.process == Process::ou ? d : 2 * d;
  const int n_steps = config.schedule.n_steps();
  const double horizon = config.schedule.horizon;

  SampleBatch batch;
  batch.points.resize(static_cast<std::size_t>(config.n_paths));
  batch.path_seeds.resize(static_cast<std::size_t>(config.n_paths));
  for (int p = 0; p < config.n_paths; ++p)
    batch.path_seeds[static_cast<std::size_t>(p)] =
        substream_seed(config.seed, "path", static_cast<std::uint64_t>(p));

  for_each_chunk(
      static_cast<std::size_t>(config.n_paths), 256, config.workers,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
          Rng rng(batch.path_seeds[p]);
          Eigen::VectorXd x = rng.normal_vector(state_dim);
          for (int k = 0; k < n_steps; ++k) {
            const double s = horizon - config.schedule.knots[static_cast<std::size_t>(k)];
            Eigen::VectorXd s_val;
            try {
              const OracleQuery q{s, x};
              s_val = config.process == Process::ou ? config.oracle.eval_ou(q)
                                                    : config.oracle.eval_kou(q);
            } catch (const std::exception& e) {
              throw std::runtime_error("run: oracle evaluation failed on path " +
                                       std::to_string(p) + ": " + e.what());
            }
            double h = config.schedule.steps[static_cast<std::size_t>(k)];
            if (k == n_steps - 1) h -= config.early_stop_delta;
            x = config.process == Process::ou ? ei_step_ou(x, s_val, h, rng)
                                              : ei_step_kou(x, s_val, h, rng);
          }
          batch.points[p] = std::move(x);
        }
      });
  return batch;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, res.ptr);
}

}  // namespace

void write_batch_csv(const SampleBatch& batch, Process process, int d, std::ostream& out) {
  std::string header = "path_index";
  for (int i = 0; i < d; ++i) header += ",x_" + std::to_string(i);
  if (process == Process::kou)
    for (int i = 0; i < d; ++i) header += ",v_" + std::to_string(i);
  out << header << "\n";
  for (std::size_t p = 0; p < batch.points.size(); ++p) {
    std::string line = std::to_string(p);
    const Eigen::VectorXd& x = batch.points[p];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      line += ',';
      append_double(line, x[i]);
    }
    out << line << "\n";
  }
}

}  // namespace scorelab
