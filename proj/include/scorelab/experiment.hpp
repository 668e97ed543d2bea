#pragma once
// JSON experiment specs, the sweep runner, and the command entry points
// behind the CLI (kept in the library so tests can drive them directly).

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorelab/diagnostics.hpp"
#include "scorelab/mixture.hpp"
#include "scorelab/oracle.hpp"
#include "scorelab/sampler.hpp"
#include "scorelab/schedule.hpp"

namespace scorelab {

struct DataSpec {
  enum class Kind { gaussian, gaussian_unit, mixture };
  Kind kind = Kind::gaussian;
  Eigen::VectorXd mean;                // gaussian
  Eigen::MatrixXd cov;                 // gaussian
  double mean_norm = 0.0;              // gaussian_unit: mean_norm * e_1 per swept d
  std::optional<GaussianMixture> mix;  // mixture
};

struct OracleSpec {
  OracleKind kind = OracleKind::exact;
  std::optional<double> epsilon;  // fixed value; absent when swept
  std::optional<double> rho;
  Eigen::VectorXd direction;  // absolute_bias; empty selects the first axis vector
  std::uint64_t noise_seed = 0;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  double c = 0.0;  // exp_then_const only
  double a = 0.0;
};

struct Sweep {
  std::vector<int> d;  // gaussian_unit only
  std::vector<double> T, h, epsilon, rho;
};

// Validated image of a "scorelab-experiment/1" JSON document.
struct ExperimentSpec {
  Process process = Process::ou;
  DataSpec data;
  OracleSpec oracle;
  ScheduleSpec schedule;
  Sweep sweep;
  int n_paths = 0;
  std::uint64_t seed = 0;
  double early_stop_delta = 0.0;
  std::vector<std::string> checks;  // subset of {"pipeline", "ledger", "sample_moments"}
  std::string out = "out";
};

// Throw std::invalid_argument with a message naming the offending field.
ExperimentSpec parse_experiment(const nlohmann::json& j);
ExperimentSpec load_experiment(const std::string& path);

struct CellResult {
  int cell = 0;
  int d = 0;
  double T = 0.0;
  double h, c, a, epsilon, rho;  // nan where not applicable
  int n_paths = 0;
  double kl_exact;  // nan unless the pipeline check ran
  bool has_ledger = false;
  ErrorLedger ledger;
  double sample_mean_norm, sample_second_moment;  // nan unless sampled
  double runtime_ms = 0.0;  // reported in the summary only, never in the CSV
};

struct RunOutput {
  std::vector<CellResult> cells;
  std::string csv;          // byte-stable for a fixed seed, any worker count
  nlohmann::json summary;   // cells + fitted slopes + conventions + timings
};

RunOutput run_experiment(const ExperimentSpec& spec, std::uint64_t seed, int workers);

// Command entry points; return the process exit code (0 ok, 1 failed
// check / computation error, 2 invalid configuration or usage).
int cmd_run(const std::string& spec_path, const std::optional<std::string>& out_dir,
            const std::optional<std::uint64_t>& seed, int workers, std::ostream& out,
            std::ostream& err);
int cmd_verify(const std::string& suite, std::uint64_t seed, int workers, std::ostream& out,
               std::ostream& err);
int cmd_sample(const std::string& spec_path, const std::string& csv_path,
               const std::optional<std::uint64_t>& seed, int workers, std::ostream& out,
               std::ostream& err);

std::vector<std::string> verify_suite_names();

}  // namespace scorelab
