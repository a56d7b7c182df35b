#ifndef TELEMC_EXPERIMENTS_HPP
#define TELEMC_EXPERIMENTS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "telemc/diagnostics.hpp"
#include "telemc/gp_data.hpp"
#include "telemc/meanfield.hpp"

namespace telemc {

enum class ExperimentKind {
  kMeanfield,
  kDoubleWellSample,
  kGPUnivariate,
  kGPMultivariate,
  kGPNonGaussian,
  kFiniteVerify,
};

std::string kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);

struct MeanfieldParams {
  std::string dynamics = "nonlinear";  // "nonlinear" or "linear"
  double beta = 5.0;
  double sigma = 0.0125;
  double dt = 0.01;
  double t_end = 25.0;
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  int grid_points = 1000;
  int record_stride = 1;
  std::vector<double> snapshot_times;
};

struct DoubleWellSampleParams {
  double beta = 5.0;
  double proposal_sigma = 0.25;
  int n_walkers = 50;
  long steps = 100000;
  double init_center = 0.0;
  double init_spread = 1.0;
  double burn_in_fraction = 0.1;
  double window_c = 5.0;
};

struct GPUnivariateParams {
  int m = 40;
  std::uint64_t dataset_seed = 1;
  int n_walkers = 50;
  long steps = 1000000;
  double proposal_variance = 0.01;  // beta^2, isotropic on (alpha, rho, sigma)
  double prior_scale = 3.0;
  double burn_in_fraction = 0.1;
  double window_c = 5.0;
  int summary_index = 1;  // rho
  double init_lo = 0.5;
  double init_hi = 2.0;
};

struct GPMultivariateParams {
  int n = 3;
  int m = 40;
  std::uint64_t dataset_seed = 1;
  int n_walkers = 100;
  long steps = 1000000;
  // Group-wise diagonal proposal: alpha, every metric-factor entry, sigma.
  double proposal_variance_alpha = 0.1;
  double proposal_variance_metric = 0.01;
  double proposal_variance_sigma = 0.01;
  double prior_scale = 3.0;
  double burn_in_fraction = 0.1;
  double window_c = 5.0;
  int summary_index = 1;  // first diagonal entry of the metric factor
};

struct GPNonGaussianParams {
  int m = 40;
  std::uint64_t dataset_seed = 1;
  int n_walkers = 60;
  long steps = 100000;  // interacting-stage attempts
  double proposal_variance_alpha = 0.001;
  double proposal_variance_rho = 0.001;
  double proposal_variance_sigma = 0.0001;
  double w_proposal_variance = 0.001;  // beta^2 for the parallel w-chains
  int n_inner = 30;
  double nu = 2.0;
  double prior_scale = 3.0;
  double burn_in_fraction = 0.1;
  double window_c = 5.0;
  int summary_index = 1;  // rho
  double init_lo = 0.5;
  double init_hi = 2.0;
};

struct FiniteVerifyParams {
  int stationarity_instances = 200;
  int equivalence_instances = 1000;
  int spectrum_instances = 1000;
  int metropolized_spectrum_instances = 100;
  int infbound_instances = 1000;
  int max_states = 6;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kFiniteVerify;
  std::uint64_t seed = 0;
  MeanfieldParams meanfield;
  DoubleWellSampleParams double_well;
  GPUnivariateParams gp_univariate;
  GPMultivariateParams gp_multivariate;
  GPNonGaussianParams gp_nongaussian;
  FiniteVerifyParams finite_verify;
};

// Strict parsing: unknown keys, missing required keys, and out-of-range values
// raise ConfigError with the field name. Round-trips bit-exactly through
// config_to_json.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a hash of the canonical serialized config, as fixed-width hex.
std::string config_hash_hex(const ExperimentConfig& config);

// In-memory runners used by run_experiment and by tests that do not need
// file output.
struct SamplerRunResult {
  RunRecord record;
  Eigen::MatrixXd final_walkers;
};

SamplerRunResult run_double_well_sample(const DoubleWellSampleParams& params,
                                        std::uint64_t seed);
SamplerRunResult run_gp_univariate(const GPUnivariateParams& params, std::uint64_t seed,
                                   const GPDataset& data);
SamplerRunResult run_gp_multivariate(const GPMultivariateParams& params, std::uint64_t seed,
                                     const GPDataset& data);
SamplerRunResult run_gp_nongaussian(const GPNonGaussianParams& params, std::uint64_t seed,
                                    const GPDataset& data);
TrajectoryRecord run_meanfield(const MeanfieldParams& params);
nlohmann::json run_finite_verify(const FiniteVerifyParams& params, std::uint64_t seed);

// Executes the configured experiment, writes its artifact files under
// out_dir, and returns the summary JSON (also written as summary.json).
nlohmann::json run_experiment(const ExperimentConfig& config,
                              const std::filesystem::path& out_dir);

// RunRecord CSV: `step,ensemble_mean,cloned_value,accepted,teleported` under
// a comment header carrying the config hash and seed.
void write_run_record_csv(const RunRecord& record, std::ostream& os,
                          const std::string& config_hash, std::uint64_t seed);
RunRecord read_run_record_csv(std::istream& is);

}  // namespace telemc

#endif
