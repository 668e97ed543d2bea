#include "scorelab/experiment.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "scorelab/kernels.hpp"
#include "scorelab/numerics.hpp"
#include "scorelab/pipeline.hpp"

namespace scorelab {
namespace {

using nlohmann::json;

double dnan() { return std::numeric_limits<double>::quiet_NaN(); }

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

const json& need(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) fail(std::string("missing field '") + field + "'");
  return *it;
}

std::string need_string(const json& j, const char* field) {
  const json& v = need(j, field);
  if (!v.is_string()) fail(std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

double need_number(const json& j, const char* field) {
  const json& v = need(j, field);
  if (!v.is_number()) fail(std::string("field '") + field + "' must be a number");
  return v.get<double>();
}

std::uint64_t opt_seed_field(const json& j, const char* field, std::uint64_t fallback) {
  const auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer() || it->get<double>() < 0)
    fail(std::string("field '") + field + "' must be a nonnegative integer");
  return it->get<std::uint64_t>();
}

Eigen::VectorXd to_vector(const json& v, const char* field) {
  if (!v.is_array() || v.empty()) fail(std::string("field '") + field + "' must be a nonempty array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& e : v) {
    if (!e.is_number()) fail(std::string("field '") + field + "' must be a nonempty array of numbers");
    out[i++] = e.get<double>();
  }
  return out;
}

Eigen::MatrixXd to_matrix(const json& v, const char* field) {
  if (!v.is_array() || v.empty()) fail(std::string("field '") + field + "' must be a square matrix of numbers");
  const Eigen::Index n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd out(n, n);
  Eigen::Index r = 0;
  for (const auto& row : v) {
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      fail(std::string("field '") + field + "' must be a square matrix of numbers");
    Eigen::Index c = 0;
    for (const auto& e : row) {
      if (!e.is_number()) fail(std::string("field '") + field + "' must be a square matrix of numbers");
      out(r, c++) = e.get<double>();
    }
    ++r;
  }
  return out;
}

std::vector<double> number_axis(const json& sweep, const char* name) {
  const auto it = sweep.find(name);
  if (it == sweep.end()) return {};
  if (!it->is_array())
    fail(std::string("sweep axis '") + name + "' must be an array of numbers");
  if (it->empty()) fail(std::string("sweep axis '") + name + "' empty");
  std::vector<double> out;
  for (const auto& e : *it) {
    if (!e.is_number()) fail(std::string("sweep axis '") + name + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

bool has_check(const ExperimentSpec& s, const char* name) {
  return std::find(s.checks.begin(), s.checks.end(), name) != s.checks.end();
}

}  // namespace

ExperimentSpec parse_experiment(const json& j) {
  if (!j.is_object()) fail("experiment spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    static const char* allowed[] = {"schema", "process",          "data",   "oracle",
                                    "schedule", "sweep",          "n_paths", "seed",
                                    "early_stop_delta", "checks", "out"};
    if (std::find_if(std::begin(allowed), std::end(allowed),
                     [&](const char* a) { return key == a; }) == std::end(allowed))
      fail("unknown field '" + key + "'");
  }
  const std::string schema = need_string(j, "schema");
  if (schema != "scorelab-experiment/1") fail("unsupported schema '" + schema + "'");

  ExperimentSpec s;
  const std::string proc = need_string(j, "process");
  if (proc == "ou")
    s.process = Process::ou;
  else if (proc == "kou")
    s.process = Process::kou;
  else
    fail("field 'process' must be \"ou\" or \"kou\"");

  const json& data = need(j, "data");
  if (!data.is_object()) fail("field 'data' must be an object");
  const std::string dkind = need_string(data, "kind");
  if (dkind == "gaussian") {
    s.data.kind = DataSpec::Kind::gaussian;
    s.data.mean = to_vector(need(data, "mean"), "mean");
    s.data.cov = to_matrix(need(data, "cov"), "cov");
    if (s.data.cov.rows() != s.data.mean.size())
      fail("field 'cov' must match the dimension of 'mean'");
  } else if (dkind == "gaussian_unit") {
    s.data.kind = DataSpec::Kind::gaussian_unit;
    s.data.mean_norm = need_number(data, "mean_norm");
    if (!(s.data.mean_norm >= 0.0)) fail("field 'mean_norm' must be nonnegative");
  } else if (dkind == "mixture") {
    s.data.kind = DataSpec::Kind::mixture;
    s.data.mix = mixture_from_json(need(data, "mixture"));
  } else {
    fail("unknown data kind '" + dkind + "'");
  }

  const json& orc = need(j, "oracle");
  if (!orc.is_object()) fail("field 'oracle' must be an object");
  const std::string okind = need_string(orc, "kind");
  if (okind == "exact")
    s.oracle.kind = OracleKind::exact;
  else if (okind == "absolute_bias")
    s.oracle.kind = OracleKind::absolute_bias;
  else if (okind == "isotropic_noise")
    s.oracle.kind = OracleKind::isotropic_noise;
  else if (okind == "relative_scaling")
    s.oracle.kind = OracleKind::relative_scaling;
  else
    fail("unknown oracle kind '" + okind + "'");
  if (orc.contains("epsilon")) {
    const double e = need_number(orc, "epsilon");
    if (!(e >= 0.0)) fail("field 'epsilon' must be nonnegative");
    s.oracle.epsilon = e;
  }
  if (orc.contains("rho")) {
    const double r = need_number(orc, "rho");
    if (!(r > -1.0)) fail("field 'rho' must exceed -1");
    s.oracle.rho = r;
  }
  if (orc.contains("direction")) s.oracle.direction = to_vector(orc["direction"], "direction");
  s.oracle.noise_seed = opt_seed_field(orc, "noise_seed", 0);

  const json& sch = need(j, "schedule");
  if (!sch.is_object()) fail("field 'schedule' must be an object");
  const std::string skind = need_string(sch, "kind");
  if (skind == "constant") {
    s.schedule.kind = ScheduleKind::constant;
  } else if (skind == "exp_then_const") {
    s.schedule.kind = ScheduleKind::exp_then_const;
    s.schedule.c = need_number(sch, "c");
    s.schedule.a = need_number(sch, "a");
    if (!(s.schedule.c > 0.0 && s.schedule.c <= 0.5)) fail("field 'c' must lie in (0, 1/2]");
    if (!(s.schedule.a >= 0.0 && s.schedule.a <= 1.0)) fail("field 'a' must lie in [0, 1]");
  } else {
    fail("unknown schedule kind '" + skind + "'");
  }

  const json& sweep = need(j, "sweep");
  if (!sweep.is_object()) fail("field 'sweep' must be an object");
  for (const auto& [key, value] : sweep.items()) {
    (void)value;
    static const char* axes[] = {"d", "T", "h", "epsilon", "rho"};
    if (std::find_if(std::begin(axes), std::end(axes),
                     [&](const char* a) { return key == a; }) == std::end(axes))
      fail("unknown sweep axis '" + key + "'");
  }
  s.sweep.T = number_axis(sweep, "T");
  if (s.sweep.T.empty()) fail("missing sweep axis 'T'");
  s.sweep.h = number_axis(sweep, "h");
  s.sweep.epsilon = number_axis(sweep, "epsilon");
  s.sweep.rho = number_axis(sweep, "rho");
  if (sweep.contains("d")) {
    const json& dv = sweep["d"];
    if (!dv.is_array()) fail("sweep axis 'd' must be an array of positive integers");
    if (dv.empty()) fail("sweep axis 'd' empty");
    for (const auto& e : dv) {
      if (!e.is_number_integer() || e.get<int>() < 1)
        fail("sweep axis 'd' must be an array of positive integers");
      s.sweep.d.push_back(e.get<int>());
    }
  }

  for (double h : s.sweep.h)
    if (!(h > 0.0 && h <= 1.0)) fail("sweep axis 'h' entries must lie in (0, 1]");
  for (double e : s.sweep.epsilon)
    if (!(e >= 0.0)) fail("sweep axis 'epsilon' entries must be nonnegative");
  for (double r : s.sweep.rho)
    if (!(r > -1.0)) fail("sweep axis 'rho' entries must exceed -1");

  const bool bias_kind =
      s.oracle.kind == OracleKind::absolute_bias || s.oracle.kind == OracleKind::isotropic_noise;
  if (s.schedule.kind == ScheduleKind::constant && s.sweep.h.empty())
    fail("schedule kind 'constant' requires sweep axis 'h'");
  if (s.schedule.kind == ScheduleKind::exp_then_const && !s.sweep.h.empty())
    fail("sweep axis 'h' conflicts with schedule kind 'exp_then_const'");
  if (!s.sweep.d.empty() && s.data.kind != DataSpec::Kind::gaussian_unit)
    fail("sweep axis 'd' requires data kind 'gaussian_unit'");
  if (!s.sweep.epsilon.empty() && !bias_kind)
    fail("sweep axis 'epsilon' requires oracle kind 'absolute_bias' or 'isotropic_noise'");
  if (!s.sweep.rho.empty() && s.oracle.kind != OracleKind::relative_scaling)
    fail("sweep axis 'rho' requires oracle kind 'relative_scaling'");
  if (bias_kind && s.sweep.epsilon.empty() && !s.oracle.epsilon)
    fail("oracle kind '" + okind + "' needs field 'epsilon' or sweep axis 'epsilon'");
  if (s.oracle.kind == OracleKind::relative_scaling && s.sweep.rho.empty() && !s.oracle.rho)
    fail("oracle kind 'relative_scaling' needs field 'rho' or sweep axis 'rho'");
  if (!s.sweep.epsilon.empty() && s.oracle.epsilon)
    fail("field 'epsilon' conflicts with sweep axis 'epsilon'");
  if (!s.sweep.rho.empty() && s.oracle.rho) fail("field 'rho' conflicts with sweep axis 'rho'");

  if (j.contains("n_paths")) {
    const json& np = j["n_paths"];
    if (!np.is_number_integer() || np.get<int>() < 0)
      fail("field 'n_paths' must be a nonnegative integer");
    s.n_paths = np.get<int>();
  }
  s.seed = opt_seed_field(j, "seed", 0);
  if (j.contains("early_stop_delta")) {
    s.early_stop_delta = need_number(j, "early_stop_delta");
    if (!(s.early_stop_delta >= 0.0)) fail("field 'early_stop_delta' must be nonnegative");
  }

  if (j.contains("checks")) {
    const json& cj = j["checks"];
    if (!cj.is_array()) fail("field 'checks' must be an array of strings");
    for (const auto& e : cj) {
      if (!e.is_string()) fail("field 'checks' must be an array of strings");
      const std::string name = e.get<std::string>();
      if (name != "pipeline" && name != "ledger" && name != "sample_moments")
        fail("unknown check '" + name + "'");
      s.checks.push_back(name);
    }
  } else {
    s.checks = {"pipeline", "ledger"};
  }
  if (has_check(s, "pipeline")) {
    if (s.data.kind == DataSpec::Kind::mixture)
      fail("check 'pipeline' requires single-Gaussian data");
    if (s.oracle.kind == OracleKind::isotropic_noise)
      fail("check 'pipeline' is incompatible with oracle kind 'isotropic_noise'");
  }
  if (has_check(s, "sample_moments") && s.n_paths < 1)
    fail("check 'sample_moments' requires n_paths >= 1");

  if (j.contains("out")) s.out = need_string(j, "out");
  return s;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open spec file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("spec file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment(j);
}

namespace {

int default_dim(const DataSpec& data) {
  switch (data.kind) {
    case DataSpec::Kind::gaussian:
      return static_cast<int>(data.mean.size());
    case DataSpec::Kind::gaussian_unit:
      return 1;
    case DataSpec::Kind::mixture:
      return data.mix->dim();
  }
  return 1;
}

GaussianMixture data_for(const DataSpec& data, int d) {
  switch (data.kind) {
    case DataSpec::Kind::gaussian:
      return GaussianMixture::single(data.mean, data.cov);
    case DataSpec::Kind::gaussian_unit: {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
      m[0] = data.mean_norm;
      return GaussianMixture::single(m, Eigen::MatrixXd::Identity(d, d));
    }
    case DataSpec::Kind::mixture:
      return *data.mix;
  }
  throw std::logic_error("data_for: unreachable");
}

ScoreOracle oracle_for(const OracleSpec& os, const GaussianMixture& base, double epsilon,
                       double rho) {
  switch (os.kind) {
    case OracleKind::exact:
      return ScoreOracle::exact(base);
    case OracleKind::absolute_bias: {
      Eigen::VectorXd u = os.direction;
      if (u.size() == 0) {
        u = Eigen::VectorXd::Zero(base.dim());
        u[0] = 1.0;
      } else if (u.size() != base.dim()) {
        fail("field 'direction' must match the cell dimension");
      }
      return ScoreOracle::absolute_bias(base, epsilon, u);
    }
    case OracleKind::isotropic_noise:
      return ScoreOracle::isotropic_noise(base, epsilon, os.noise_seed);
    case OracleKind::relative_scaling:
      return ScoreOracle::relative_scaling(base, rho);
  }
  throw std::logic_error("oracle_for: unreachable");
}

Schedule schedule_for(const ExperimentSpec& spec, double T, double h) {
  return spec.schedule.kind == ScheduleKind::constant
             ? make_constant_schedule(T, h)
             : make_exp_then_const_schedule(T, spec.schedule.c, spec.schedule.a,
                                            spec.early_stop_delta);
}

json cell_to_json(const CellResult& c) {
  auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
  json j{{"cell", c.cell},       {"d", c.d},
         {"T", c.T},             {"h", num(c.h)},
         {"c", num(c.c)},        {"a", num(c.a)},
         {"epsilon", num(c.epsilon)}, {"rho", num(c.rho)},
         {"n_paths", c.n_paths}, {"kl_exact", num(c.kl_exact)},
         {"runtime_ms", c.runtime_ms}};
  if (c.has_ledger) {
    j["e1"] = c.ledger.e1;
    j["e2"] = c.ledger.e2;
    j["e3"] = c.ledger.e3;
    j["c_t_eps"] = c.ledger.c_t_eps;
    j["kl_bound"] = c.ledger.kl_bound;
    j["kappa"] = c.ledger.kappa;
  }
  j["sample_mean_norm"] = num(c.sample_mean_norm);
  j["sample_second_moment"] = num(c.sample_second_moment);
  return j;
}

}  // namespace

RunOutput run_experiment(const ExperimentSpec& spec, std::uint64_t seed, int workers) {
  const auto wall_start = std::chrono::steady_clock::now();

  std::vector<int> ds = spec.sweep.d.empty() ? std::vector<int>{default_dim(spec.data)}
                                             : spec.sweep.d;
  const bool swept_eps = !spec.sweep.epsilon.empty();
  const bool swept_rho = !spec.sweep.rho.empty();
  std::vector<double> evals{dnan()};
  if (swept_eps) evals = spec.sweep.epsilon;
  if (swept_rho) evals = spec.sweep.rho;
  const std::vector<double> hs = spec.schedule.kind == ScheduleKind::constant
                                     ? spec.sweep.h
                                     : std::vector<double>{dnan()};

  const bool do_pipeline = has_check(spec, "pipeline");
  const bool do_ledger = has_check(spec, "ledger");
  const bool do_sample = has_check(spec, "sample_moments");

  InfoSummary info{};
  bool info_ready = false;
  const auto info_for_ledger = [&]() -> const InfoSummary& {
    if (!info_ready && spec.data.kind == DataSpec::Kind::mixture) {
      info = info_summary(*spec.data.mix);
      info_ready = true;
    }
    return info;
  };

  RunOutput out;
  int cell_index = 0;
  for (int d : ds) {
    const GaussianMixture base = data_for(spec.data, d);
    for (double T : spec.sweep.T) {
      for (double h : hs) {
        for (double ev : evals) {
          const auto cell_start = std::chrono::steady_clock::now();
          CellResult cr;
          cr.cell = cell_index;
          cr.d = d;
          cr.T = T;
          cr.h = h;
          cr.c = spec.schedule.kind == ScheduleKind::exp_then_const ? spec.schedule.c : dnan();
          cr.a = spec.schedule.kind == ScheduleKind::exp_then_const ? spec.schedule.a : dnan();
          cr.epsilon = dnan();
          cr.rho = dnan();
          double eps = 0.0, rho = 0.0;
          if (spec.oracle.kind == OracleKind::absolute_bias ||
              spec.oracle.kind == OracleKind::isotropic_noise) {
            eps = swept_eps ? ev : *spec.oracle.epsilon;
            cr.epsilon = eps;
          }
          if (spec.oracle.kind == OracleKind::relative_scaling) {
            rho = swept_rho ? ev : *spec.oracle.rho;
            cr.rho = rho;
          }
          cr.kl_exact = dnan();
          cr.sample_mean_norm = dnan();
          cr.sample_second_moment = dnan();

          const RunConfig cfg{spec.process,
                              schedule_for(spec, T, h),
                              oracle_for(spec.oracle, base, eps, rho),
                              std::max(spec.n_paths, 1),
                              substream_seed(seed, "cell", static_cast<std::uint64_t>(cell_index)),
                              spec.early_stop_delta,
                              workers};

          if (do_pipeline) cr.kl_exact = pipeline_kl(cfg);
          if (do_ledger) {
            cr.ledger = error_ledger(cfg, info_for_ledger());
            cr.has_ledger = true;
          }
          if (do_sample) {
            const SampleBatch batch = run(cfg);
            cr.n_paths = static_cast<int>(batch.points.size());
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(batch.points.front().size());
            double second = 0.0;
            for (const Eigen::VectorXd& x : batch.points) {
              mean += x;
              second += x.squaredNorm();
            }
            mean /= static_cast<double>(batch.points.size());
            second /= static_cast<double>(batch.points.size());
            cr.sample_mean_norm = mean.norm();
            cr.sample_second_moment = second;
          }
          cr.runtime_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - cell_start)
                              .count();
          out.cells.push_back(std::move(cr));
          ++cell_index;
        }
      }
    }
  }

  // Results table: byte-stable across worker counts, so no runtimes here.
  std::string csv =
      "cell,d,T,h,c,a,epsilon,rho,n_paths,kl_exact,e1,e2,e3,c_t_eps,kl_bound,"
      "sample_mean_norm,sample_second_moment\n";
  for (const CellResult& c : out.cells) {
    csv += std::to_string(c.cell);
    csv += ',' + std::to_string(c.d);
    for (double v : {c.T, c.h, c.c, c.a, c.epsilon, c.rho}) csv += ',' + format_double(v);
    csv += ',' + std::to_string(c.n_paths);
    csv += ',' + format_double(c.kl_exact);
    if (c.has_ledger)
      for (double v : {c.ledger.e1, c.ledger.e2, c.ledger.e3, c.ledger.c_t_eps, c.ledger.kl_bound})
        csv += ',' + format_double(v);
    else
      for (int i = 0; i < 5; ++i) csv += ',' + format_double(dnan());
    csv += ',' + format_double(c.sample_mean_norm);
    csv += ',' + format_double(c.sample_second_moment);
    csv += '\n';
  }
  out.csv = csv;

  json cells_j = json::array();
  for (const CellResult& c : out.cells) cells_j.push_back(cell_to_json(c));
  out.summary = json{{"schema", "scorelab-summary/1"},
                     {"seed", seed},
                     {"workers", workers},
                     {"conventions",
                      {{"ou_kernel_noise_variance", "1 - exp(-2t)"},
                       {"kou_kernel_map", "transpose(expm(-A t))"}}},
                     {"cells", cells_j}};

  // Fitted slopes, only when exactly one axis varies so the fit is unambiguous.
  json slopes = json::object();
  const std::size_t nd = ds.size(), nT = spec.sweep.T.size(), nh = hs.size(), ne = evals.size();
  const auto fit_if_positive = [&](const std::vector<double>& xs, const std::vector<double>& ys,
                                   const char* name) {
    if (xs.size() < 2) return;
    for (double y : ys)
      if (!(y > 0.0) || !std::isfinite(y)) return;
    std::vector<double> logy(ys.size());
    std::transform(ys.begin(), ys.end(), logy.begin(), [](double y) { return std::log(y); });
    slopes[name] = ols_fit(xs, logy).slope;
  };
  if (nT >= 2 && nd == 1 && nh == 1 && ne == 1) {
    std::vector<double> kl, bound;
    for (const CellResult& c : out.cells) {
      kl.push_back(c.kl_exact);
      bound.push_back(c.has_ledger ? c.ledger.kl_bound : dnan());
    }
    fit_if_positive(spec.sweep.T, kl, "slope_kl_vs_T");
    fit_if_positive(spec.sweep.T, bound, "slope_klbound_vs_T");
  }
  if (nh >= 2 && nd == 1 && nT == 1 && ne == 1) {
    std::vector<double> logh(nh), kl, bound;
    std::transform(hs.begin(), hs.end(), logh.begin(), [](double h) { return std::log(h); });
    for (const CellResult& c : out.cells) {
      kl.push_back(c.kl_exact);
      bound.push_back(c.has_ledger ? c.ledger.kl_bound : dnan());
    }
    fit_if_positive(logh, kl, "slope_log_kl_vs_log_h");
    fit_if_positive(logh, bound, "slope_log_klbound_vs_log_h");
  }
  if ((swept_eps || swept_rho) && ne >= 2 && nd == 1 && nT == 1 && nh == 1 && do_pipeline &&
      spec.oracle.kind != OracleKind::isotropic_noise) {
    // Excess over the exact-oracle baseline at identical (d, T, schedule).
    const GaussianMixture base = data_for(spec.data, ds[0]);
    const RunConfig base_cfg{spec.process,
                             schedule_for(spec, spec.sweep.T[0], hs[0]),
                             ScoreOracle::exact(base),
                             1,
                             substream_seed(seed, "baseline", 0),
                             spec.early_stop_delta,
                             workers};
    const double base_kl = pipeline_kl(base_cfg);
    out.summary["baseline_kl"] = base_kl;
    std::vector<double> xs, excess;
    for (std::size_t i = 0; i < out.cells.size(); ++i) {
      const double level = evals[i];
      const double ex = out.cells[i].kl_exact - base_kl;
      if (level > 0.0 && ex > 0.0) {
        xs.push_back(std::log(level * level));
        excess.push_back(ex);
      }
    }
    fit_if_positive(xs, excess,
                    swept_rho ? "slope_excess_kl_vs_rho_sq" : "slope_excess_kl_vs_eps_sq");
  }
  if (!slopes.empty()) out.summary["slopes"] = slopes;

  double total_ms = 0.0;
  for (const CellResult& c : out.cells) total_ms += c.runtime_ms;
  out.summary["timings"] = {
      {"total_ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             wall_start)
                       .count()},
      {"cells_ms", total_ms}};
  return out;
}

int cmd_run(const std::string& spec_path, const std::optional<std::string>& out_dir,
            const std::optional<std::uint64_t>& seed, int workers, std::ostream& out,
            std::ostream& err) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(spec_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    const RunOutput result = run_experiment(spec, seed.value_or(spec.seed), workers);
    const std::filesystem::path dir = out_dir.value_or(spec.out);
    std::filesystem::create_directories(dir);
    {
      std::ofstream csv(dir / "results.csv");
      if (!csv) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
      csv << result.csv;
    }
    {
      std::ofstream js(dir / "summary.json");
      if (!js) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
      js << result.summary.dump(2) << "\n";
    }
    out << "cells: " << result.cells.size() << "\n";
    out << "wrote " << (dir / "results.csv").string() << "\n";
    out << "wrote " << (dir / "summary.json").string() << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sample(const std::string& spec_path, const std::string& csv_path,
               const std::optional<std::uint64_t>& seed, int workers, std::ostream& out,
               std::ostream& err) {
  ExperimentSpec spec;
  try {
    spec = load_experiment(spec_path);
    if (spec.sweep.T.size() != 1 || spec.sweep.h.size() > 1 || spec.sweep.d.size() > 1 ||
        spec.sweep.epsilon.size() > 1 || spec.sweep.rho.size() > 1)
      fail("sample requires a single-cell spec (every sweep axis singleton)");
    if (spec.n_paths < 1) fail("sample requires n_paths >= 1");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    const int d = spec.sweep.d.empty() ? default_dim(spec.data) : spec.sweep.d[0];
    const GaussianMixture base = data_for(spec.data, d);
    double eps = 0.0, rho = 0.0;
    if (spec.oracle.kind == OracleKind::absolute_bias ||
        spec.oracle.kind == OracleKind::isotropic_noise)
      eps = spec.sweep.epsilon.empty() ? *spec.oracle.epsilon : spec.sweep.epsilon[0];
    if (spec.oracle.kind == OracleKind::relative_scaling)
      rho = spec.sweep.rho.empty() ? *spec.oracle.rho : spec.sweep.rho[0];
    const double h = spec.sweep.h.empty() ? dnan() : spec.sweep.h[0];
    const RunConfig cfg{spec.process,
                        schedule_for(spec, spec.sweep.T[0], h),
                        oracle_for(spec.oracle, base, eps, rho),
                        spec.n_paths,
                        seed.value_or(spec.seed),
                        spec.early_stop_delta,
                        workers};
    const SampleBatch batch = run(cfg);
    const std::filesystem::path path = csv_path;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + csv_path);
    write_batch_csv(batch, spec.process, d, file);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(batch.points.front().size());
    double second = 0.0;
    for (const Eigen::VectorXd& x : batch.points) {
      mean += x;
      second += x.squaredNorm();
    }
    mean /= static_cast<double>(batch.points.size());
    second /= static_cast<double>(batch.points.size());
    out << json{{"n_paths", batch.points.size()},
                {"dim", mean.size()},
                {"mean_norm", mean.norm()},
                {"second_moment", second}}
               .dump()
        << "\n";
    return 0;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// verify suites

namespace {

GaussianMixture golden_mixture() {
  using C = GaussianMixture::Component;
  Eigen::VectorXd m1(1), m2(1);
  m1 << 2.0;
  m2 << -2.0;
  Eigen::MatrixXd v(1, 1);
  v << 1.0;
  return GaussianMixture({C{0.5, m1, v}, C{0.5, m2, v}});
}

Report deterministic_report(const std::string& check, double estimate, double bound, json params) {
  Report r;
  r.check = check;
  r.params = std::move(params);
  r.estimate = estimate;
  r.bound = bound;
  r.pass = estimate <= bound;
  return r;
}

std::vector<Report> verify_kernels() {
  std::vector<Report> out;
  const int d = 3;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  A.topRightCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  A.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  A.bottomRightCorner(d, d) = 2.0 * Eigen::MatrixXd::Identity(d, d);

  const std::vector<double> times = {0.1, 0.5, 1.0, 3.0};
  double worst_expm = 0.0;
  for (double t : times) {
    const Eigen::MatrixXd numeric = (-t * A).exp();
    worst_expm = std::max(worst_expm, (kou_expm(t, d) - numeric).cwiseAbs().maxCoeff());
  }
  out.push_back(deterministic_report("kernels/propagator-vs-numeric-expm", worst_expm, 1e-12,
                                     {{"times", times}, {"d", d}}));

  double worst_cov = 0.0;
  for (double t : times) {
    // Independent route: accumulate the noise injected along the flow,
    // integrand 4 e^{-2u} [[u^2, u(1-u)], [u(1-u), (1-u)^2]] per pair.
    const Quadrature q = gauss_legendre(64, 0.0, t);
    double ixx = 0.0, ixv = 0.0, ivv = 0.0;
    for (Eigen::Index i = 0; i < q.nodes.size(); ++i) {
      const double u = q.nodes[i], w = q.weights[i] * 4.0 * std::exp(-2.0 * u);
      ixx += w * u * u;
      ixv += w * u * (1.0 - u);
      ivv += w * (1.0 - u) * (1.0 - u);
    }
    const KouCovBlocks b = kou_cov_blocks(t);
    worst_cov = std::max({worst_cov, std::abs(ixx - b.xx), std::abs(ixv - b.xv),
                          std::abs(ivv - b.vv)});
  }
  out.push_back(deterministic_report("kernels/covariance-vs-quadrature", worst_cov, 1e-10,
                                     {{"times", times}}));

  const double stat =
      (kou_cov(30.0, 2) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff();
  out.push_back(deterministic_report("kernels/stationary-limit", stat, 1e-12, {{"t", 30.0}}));

  const double s = 0.3, t = 0.9;
  const AffineGaussianKernel ks = kou_kernel(s, 2), kt = kou_kernel(t, 2),
                             kst = kou_kernel(s + t, 2);
  const double semi_map = (kt.map * ks.map - kst.map).cwiseAbs().maxCoeff();
  const double semi_cov =
      (kt.map * ks.noise_cov * kt.map.transpose() + kt.noise_cov - kst.noise_cov)
          .cwiseAbs()
          .maxCoeff();
  out.push_back(deterministic_report("kernels/semigroup", std::max(semi_map, semi_cov), 1e-11,
                                     {{"s", s}, {"t", t}}));
  return out;
}

std::vector<Report> verify_schedule(std::uint64_t seed) {
  Rng rng(substream_seed(seed, "schedule-suite", 0));
  const int n_triples = 200;
  double worst_shape = 0.0;   // absolute defects in the fixed structure
  double worst_law = 0.0;     // relative error of the contracting-step law
  double worst_count = 0.0;   // N / (4 (log(1/a) + T) / c)
  bool ok = true;

  for (int i = 0; i < n_triples; ++i) {
    const double c = 0.02 + 0.48 * rng.uniform();
    const double T = 1.0 + 2.0 * c + 6.0 * rng.uniform();
    double a;
    switch (i % 4) {
      case 0: a = 0.0; break;
      case 1: a = 1e-4 * (1.0 + 9.0 * rng.uniform()); break;
      case 2: a = 0.01 + 0.2 * rng.uniform(); break;
      default: a = 0.3 + 0.69 * rng.uniform(); break;
    }
    if (a > 0.0) {
      // keep the phase boundary unambiguous
      const double x = std::log(1.0 / a) / std::log1p(c);
      if (std::abs(x - std::round(x)) < 1e-6) a *= 1.0001;
    }
    const double delta_hint = a == 0.0 ? 1e-4 : 0.0;
    const Schedule sch = make_exp_then_const_schedule(T, c, a, delta_hint);

    if (sch.knots.front() != 0.0 || sch.knots.back() != T) ok = false;
    for (double h : sch.steps)
      if (!(h > 0.0)) ok = false;
    const int expect_k0 = static_cast<int>(std::ceil((T - 1.0) / c - 1e-9));
    if (sch.k0 != expect_k0) ok = false;
    for (int k = 0; k < sch.k0; ++k)
      worst_shape = std::max(worst_shape, std::abs(sch.steps[static_cast<std::size_t>(k)] - c));

    for (int k = sch.k0; k < sch.k0 + sch.k1; ++k) {
      const double remaining = T - sch.knots[static_cast<std::size_t>(k)];
      const double law = c * remaining / (1.0 + c);
      worst_law = std::max(worst_law,
                           std::abs(sch.steps[static_cast<std::size_t>(k)] - law) / law);
    }
    if (a > 0.0) {
      const double tail = c * a;
      for (int k = sch.k0 + sch.k1; k + 1 < sch.n_steps(); ++k)
        worst_shape =
            std::max(worst_shape, std::abs(sch.steps[static_cast<std::size_t>(k)] - tail));
      if (sch.steps.back() > tail * (1.0 + 1e-9)) ok = false;
      const double cap = 4.0 * (std::log(1.0 / a) + T) / c;
      worst_count = std::max(worst_count, sch.n_steps() / cap);
    } else {
      const double floor_gap = std::max(2.0 * delta_hint, 1e-9);
      if (sch.steps.back() > floor_gap || !(sch.steps.back() > floor_gap / (1.0 + c) * 0.999))
        ok = false;
      if (!(delta_hint < sch.steps.back())) ok = false;
    }
  }

  std::vector<Report> out;
  Report shape = deterministic_report("schedule/shape", worst_shape, 1e-10,
                                      {{"n_triples", n_triples}});
  shape.pass = shape.pass && ok;
  out.push_back(shape);
  out.push_back(deterministic_report("schedule/contracting-step-law", worst_law, 1e-9,
                                     {{"n_triples", n_triples}}));
  out.push_back(deterministic_report("schedule/count-bound", worst_count, 1.0,
                                     {{"n_triples", n_triples}}));
  return out;
}

std::vector<Report> verify_contraction(std::uint64_t seed, int workers, bool kinetic) {
  const GaussianMixture data = golden_mixture();
  const GaussianMixture state_mix = kinetic ? tensor_with_standard(data) : data;
  const double T = 2.0;
  const std::vector<double> times = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  const GCurve curve = estimate_g(state_mix, kinetic ? Process::kou : Process::ou, T, times,
                                  40000, seed, workers);
  Report rep = check_contraction(curve, kinetic ? 0.5 : 2.0, kinetic ? 20.0 : 1.0);
  rep.check = kinetic ? "contraction-kinetic" : "contraction";
  rep.params["T"] = T;
  return {rep};
}

std::vector<Report> verify_integral_identity(std::uint64_t seed, int workers) {
  const GaussianMixture data = golden_mixture();
  std::vector<Report> out;
  out.push_back(
      check_integral_identity(data, Process::ou, 2.0, 0.2, 0.8, 20000, 17, seed, workers));
  out.push_back(check_integral_identity(tensor_with_standard(data), Process::kou, 2.0, 0.2, 0.8,
                                        20000, 17, seed + 1, workers));
  return out;
}

std::vector<Report> verify_score_bound(std::uint64_t seed, int workers) {
  const GaussianMixture data = golden_mixture();
  const std::vector<double> grid = {0.0, 1.0, 2.0, 3.0, 3.9, 3.999};
  return {score_norm_bound_check(data, 4.0, grid, 20000, seed, workers)};
}

std::vector<Report> verify_denoising(std::uint64_t seed) {
  const GaussianMixture data = golden_mixture();
  std::vector<Eigen::VectorXd> points;
  for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    Eigen::VectorXd p(1);
    p << x;
    points.push_back(p);
  }
  std::vector<Report> out;
  out.push_back(denoising_score_check(data, 0.3, points, 50000, seed));
  out.push_back(denoising_score_check(data, 1.0, points, 50000, seed + 1));
  return out;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  return {"kernels",          "schedule",    "contraction", "contraction-kinetic",
          "integral-identity", "score-bound", "denoising"};
}

int cmd_verify(const std::string& suite, std::uint64_t seed, int workers, std::ostream& out,
               std::ostream& err) {
  std::vector<Report> reports;
  try {
    if (suite == "kernels")
      reports = verify_kernels();
    else if (suite == "schedule")
      reports = verify_schedule(seed);
    else if (suite == "contraction")
      reports = verify_contraction(seed, workers, false);
    else if (suite == "contraction-kinetic")
      reports = verify_contraction(seed, workers, true);
    else if (suite == "integral-identity")
      reports = verify_integral_identity(seed, workers);
    else if (suite == "score-bound")
      reports = verify_score_bound(seed, workers);
    else if (suite == "denoising")
      reports = verify_denoising(seed);
    else {
      std::string names;
      for (const std::string& n : verify_suite_names()) names += (names.empty() ? "" : ", ") + n;
      err << "error: unknown verify suite '" << suite << "' (available: " << names << ")\n";
      return 2;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  bool all_pass = true;
  for (const Report& r : reports) {
    out << report_to_json(r).dump() << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace scorelab
