#include "telemc/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "telemc/distributions.hpp"
#include "telemc/errors.hpp"
#include "telemc/finite.hpp"
#include "telemc/gp.hpp"
#include "telemc/sampler.hpp"
#include "telemc/subset.hpp"
#include "telemc/target.hpp"

namespace telemc {

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Strict object reader: every key must be consumed, unknown keys are errors.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) throw ConfigError(scope_ + ": expected a JSON object");
  }

  bool has(const char* name) { return j_.contains(name); }

  template <typename T>
  T get(const char* name, T fallback) {
    seen_.insert(name);
    if (!j_.contains(name)) return fallback;
    try {
      return j_.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(scope_ + "." + name + ": wrong type");
    }
  }

  template <typename T>
  T require(const char* name) {
    seen_.insert(name);
    if (!j_.contains(name)) throw ConfigError(scope_ + "." + name + ": missing");
    try {
      return j_.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(scope_ + "." + name + ": wrong type");
    }
  }

  nlohmann::json take_object(const char* name) {
    seen_.insert(name);
    if (!j_.contains(name)) return nlohmann::json::object();
    return j_.at(name);
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw ConfigError(scope_ + "." + it.key() + ": unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kMeanfield: return "meanfield";
    case ExperimentKind::kDoubleWellSample: return "double_well_sample";
    case ExperimentKind::kGPUnivariate: return "gp_univariate";
    case ExperimentKind::kGPMultivariate: return "gp_multivariate";
    case ExperimentKind::kGPNonGaussian: return "gp_nongaussian";
    case ExperimentKind::kFiniteVerify: return "finite_verify";
  }
  throw std::logic_error("kind_name: unreachable");
}

ExperimentKind kind_from_name(const std::string& name) {
  if (name == "meanfield") return ExperimentKind::kMeanfield;
  if (name == "double_well_sample") return ExperimentKind::kDoubleWellSample;
  if (name == "gp_univariate") return ExperimentKind::kGPUnivariate;
  if (name == "gp_multivariate") return ExperimentKind::kGPMultivariate;
  if (name == "gp_nongaussian") return ExperimentKind::kGPNonGaussian;
  if (name == "finite_verify") return ExperimentKind::kFiniteVerify;
  throw ConfigError("experiment: unknown kind '" + name + "'");
}

namespace {

MeanfieldParams parse_meanfield(const nlohmann::json& j) {
  FieldReader r(j, "params");
  MeanfieldParams p;
  p.dynamics = r.get<std::string>("dynamics", p.dynamics);
  p.beta = r.get<double>("beta", p.beta);
  p.sigma = r.get<double>("sigma", p.sigma);
  p.dt = r.get<double>("dt", p.dt);
  p.t_end = r.get<double>("t_end", p.t_end);
  p.grid_lo = r.get<double>("grid_lo", p.grid_lo);
  p.grid_hi = r.get<double>("grid_hi", p.grid_hi);
  p.grid_points = r.get<int>("grid_points", p.grid_points);
  p.record_stride = r.get<int>("record_stride", p.record_stride);
  p.snapshot_times = r.get<std::vector<double>>("snapshot_times", p.snapshot_times);
  r.finish();
  check(p.dynamics == "nonlinear" || p.dynamics == "linear",
        "params.dynamics: must be 'nonlinear' or 'linear'");
  check(p.beta > 0.0, "params.beta: must be positive");
  check(p.sigma > 0.0, "params.sigma: must be positive");
  check(p.dt > 0.0, "params.dt: must be positive");
  check(p.t_end > 0.0, "params.t_end: must be positive");
  check(p.grid_points >= 2, "params.grid_points: must be at least 2");
  check(p.grid_hi > p.grid_lo, "params.grid_hi: must exceed grid_lo");
  // E(t) integrates the density over x >= 0, so the grid must straddle zero.
  check(p.grid_lo < 0.0 && p.grid_hi > 0.0, "params.grid_lo: grid must span zero");
  check(p.record_stride >= 1, "params.record_stride: must be at least 1");
  return p;
}

nlohmann::json meanfield_to_json(const MeanfieldParams& p) {
  return {
      {"dynamics", p.dynamics},        {"beta", p.beta},
      {"sigma", p.sigma},              {"dt", p.dt},
      {"t_end", p.t_end},              {"grid_lo", p.grid_lo},
      {"grid_hi", p.grid_hi},          {"grid_points", p.grid_points},
      {"record_stride", p.record_stride}, {"snapshot_times", p.snapshot_times},
  };
}

DoubleWellSampleParams parse_double_well(const nlohmann::json& j) {
  FieldReader r(j, "params");
  DoubleWellSampleParams p;
  p.beta = r.get<double>("beta", p.beta);
  p.proposal_sigma = r.get<double>("proposal_sigma", p.proposal_sigma);
  p.n_walkers = r.get<int>("n_walkers", p.n_walkers);
  p.steps = r.get<long>("steps", p.steps);
  p.init_center = r.get<double>("init_center", p.init_center);
  p.init_spread = r.get<double>("init_spread", p.init_spread);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.window_c = r.get<double>("window_c", p.window_c);
  r.finish();
  check(p.beta > 0.0, "params.beta: must be positive");
  check(p.proposal_sigma > 0.0, "params.proposal_sigma: must be positive");
  check(p.n_walkers >= 1, "params.n_walkers: must be at least 1");
  check(p.steps >= 1, "params.steps: must be at least 1");
  check(p.init_spread > 0.0, "params.init_spread: must be positive");
  check(p.burn_in_fraction >= 0.0 && p.burn_in_fraction < 1.0,
        "params.burn_in_fraction: must lie in [0, 1)");
  check(p.window_c > 0.0, "params.window_c: must be positive");
  return p;
}

nlohmann::json double_well_to_json(const DoubleWellSampleParams& p) {
  return {
      {"beta", p.beta},
      {"proposal_sigma", p.proposal_sigma},
      {"n_walkers", p.n_walkers},
      {"steps", p.steps},
      {"init_center", p.init_center},
      {"init_spread", p.init_spread},
      {"burn_in_fraction", p.burn_in_fraction},
      {"window_c", p.window_c},
  };
}

GPUnivariateParams parse_gp_univariate(const nlohmann::json& j) {
  FieldReader r(j, "params");
  GPUnivariateParams p;
  p.m = r.get<int>("m", p.m);
  p.dataset_seed = r.get<std::uint64_t>("dataset_seed", p.dataset_seed);
  p.n_walkers = r.get<int>("n_walkers", p.n_walkers);
  p.steps = r.get<long>("steps", p.steps);
  p.proposal_variance = r.get<double>("proposal_variance", p.proposal_variance);
  p.prior_scale = r.get<double>("prior_scale", p.prior_scale);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.window_c = r.get<double>("window_c", p.window_c);
  p.summary_index = r.get<int>("summary_index", p.summary_index);
  p.init_lo = r.get<double>("init_lo", p.init_lo);
  p.init_hi = r.get<double>("init_hi", p.init_hi);
  r.finish();
  check(p.m >= 1, "params.m: must be at least 1");
  check(p.n_walkers >= 1, "params.n_walkers: must be at least 1");
  check(p.steps >= 1, "params.steps: must be at least 1");
  check(p.proposal_variance > 0.0, "params.proposal_variance: must be positive");
  check(p.prior_scale > 0.0, "params.prior_scale: must be positive");
  check(p.burn_in_fraction >= 0.0 && p.burn_in_fraction < 1.0,
        "params.burn_in_fraction: must lie in [0, 1)");
  check(p.window_c > 0.0, "params.window_c: must be positive");
  check(p.summary_index >= 0 && p.summary_index < 3,
        "params.summary_index: must lie in [0, 3)");
  check(p.init_hi > p.init_lo && p.init_lo > 0.0,
        "params.init_lo: walker initialization range must be positive");
  return p;
}

nlohmann::json gp_univariate_to_json(const GPUnivariateParams& p) {
  return {
      {"m", p.m},
      {"dataset_seed", p.dataset_seed},
      {"n_walkers", p.n_walkers},
      {"steps", p.steps},
      {"proposal_variance", p.proposal_variance},
      {"prior_scale", p.prior_scale},
      {"burn_in_fraction", p.burn_in_fraction},
      {"window_c", p.window_c},
      {"summary_index", p.summary_index},
      {"init_lo", p.init_lo},
      {"init_hi", p.init_hi},
  };
}

GPMultivariateParams parse_gp_multivariate(const nlohmann::json& j) {
  FieldReader r(j, "params");
  GPMultivariateParams p;
  p.n = r.get<int>("n", p.n);
  p.m = r.get<int>("m", p.m);
  p.dataset_seed = r.get<std::uint64_t>("dataset_seed", p.dataset_seed);
  p.n_walkers = r.get<int>("n_walkers", p.n_walkers);
  p.steps = r.get<long>("steps", p.steps);
  p.proposal_variance_alpha = r.get<double>("proposal_variance_alpha", p.proposal_variance_alpha);
  p.proposal_variance_metric =
      r.get<double>("proposal_variance_metric", p.proposal_variance_metric);
  p.proposal_variance_sigma = r.get<double>("proposal_variance_sigma", p.proposal_variance_sigma);
  p.prior_scale = r.get<double>("prior_scale", p.prior_scale);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.window_c = r.get<double>("window_c", p.window_c);
  p.summary_index = r.get<int>("summary_index", p.summary_index);
  r.finish();
  check(p.n >= 1, "params.n: must be at least 1");
  check(p.m >= 1, "params.m: must be at least 1");
  check(p.n_walkers >= 1, "params.n_walkers: must be at least 1");
  check(p.steps >= 1, "params.steps: must be at least 1");
  check(p.proposal_variance_alpha > 0.0, "params.proposal_variance_alpha: must be positive");
  check(p.proposal_variance_metric > 0.0, "params.proposal_variance_metric: must be positive");
  check(p.proposal_variance_sigma > 0.0, "params.proposal_variance_sigma: must be positive");
  check(p.prior_scale > 0.0, "params.prior_scale: must be positive");
  check(p.burn_in_fraction >= 0.0 && p.burn_in_fraction < 1.0,
        "params.burn_in_fraction: must lie in [0, 1)");
  check(p.window_c > 0.0, "params.window_c: must be positive");
  const int dim = 2 + p.n * (p.n + 1) / 2;
  check(p.summary_index >= 0 && p.summary_index < dim,
        "params.summary_index: outside the state dimension");
  return p;
}

nlohmann::json gp_multivariate_to_json(const GPMultivariateParams& p) {
  return {
      {"n", p.n},
      {"m", p.m},
      {"dataset_seed", p.dataset_seed},
      {"n_walkers", p.n_walkers},
      {"steps", p.steps},
      {"proposal_variance_alpha", p.proposal_variance_alpha},
      {"proposal_variance_metric", p.proposal_variance_metric},
      {"proposal_variance_sigma", p.proposal_variance_sigma},
      {"prior_scale", p.prior_scale},
      {"burn_in_fraction", p.burn_in_fraction},
      {"window_c", p.window_c},
      {"summary_index", p.summary_index},
  };
}

GPNonGaussianParams parse_gp_nongaussian(const nlohmann::json& j) {
  FieldReader r(j, "params");
  GPNonGaussianParams p;
  p.m = r.get<int>("m", p.m);
  p.dataset_seed = r.get<std::uint64_t>("dataset_seed", p.dataset_seed);
  p.n_walkers = r.get<int>("n_walkers", p.n_walkers);
  p.steps = r.get<long>("steps", p.steps);
  p.proposal_variance_alpha = r.get<double>("proposal_variance_alpha", p.proposal_variance_alpha);
  p.proposal_variance_rho = r.get<double>("proposal_variance_rho", p.proposal_variance_rho);
  p.proposal_variance_sigma = r.get<double>("proposal_variance_sigma", p.proposal_variance_sigma);
  p.w_proposal_variance = r.get<double>("w_proposal_variance", p.w_proposal_variance);
  p.n_inner = r.get<int>("n_inner", p.n_inner);
  p.nu = r.get<double>("nu", p.nu);
  p.prior_scale = r.get<double>("prior_scale", p.prior_scale);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.window_c = r.get<double>("window_c", p.window_c);
  p.summary_index = r.get<int>("summary_index", p.summary_index);
  p.init_lo = r.get<double>("init_lo", p.init_lo);
  p.init_hi = r.get<double>("init_hi", p.init_hi);
  r.finish();
  check(p.m >= 1, "params.m: must be at least 1");
  check(p.n_walkers >= 1, "params.n_walkers: must be at least 1");
  check(p.steps >= 1, "params.steps: must be at least 1");
  check(p.proposal_variance_alpha > 0.0, "params.proposal_variance_alpha: must be positive");
  check(p.proposal_variance_rho > 0.0, "params.proposal_variance_rho: must be positive");
  check(p.proposal_variance_sigma > 0.0, "params.proposal_variance_sigma: must be positive");
  check(p.w_proposal_variance > 0.0, "params.w_proposal_variance: must be positive");
  check(p.n_inner >= 1, "params.n_inner: must be at least 1");
  check(p.nu > 0.0, "params.nu: must be positive");
  check(p.prior_scale > 0.0, "params.prior_scale: must be positive");
  check(p.burn_in_fraction >= 0.0 && p.burn_in_fraction < 1.0,
        "params.burn_in_fraction: must lie in [0, 1)");
  check(p.window_c > 0.0, "params.window_c: must be positive");
  check(p.summary_index >= 0 && p.summary_index < 3,
        "params.summary_index: must index the interacting block");
  check(p.init_hi > p.init_lo && p.init_lo > 0.0,
        "params.init_lo: walker initialization range must be positive");
  return p;
}

nlohmann::json gp_nongaussian_to_json(const GPNonGaussianParams& p) {
  return {
      {"m", p.m},
      {"dataset_seed", p.dataset_seed},
      {"n_walkers", p.n_walkers},
      {"steps", p.steps},
      {"proposal_variance_alpha", p.proposal_variance_alpha},
      {"proposal_variance_rho", p.proposal_variance_rho},
      {"proposal_variance_sigma", p.proposal_variance_sigma},
      {"w_proposal_variance", p.w_proposal_variance},
      {"n_inner", p.n_inner},
      {"nu", p.nu},
      {"prior_scale", p.prior_scale},
      {"burn_in_fraction", p.burn_in_fraction},
      {"window_c", p.window_c},
      {"summary_index", p.summary_index},
      {"init_lo", p.init_lo},
      {"init_hi", p.init_hi},
  };
}

FiniteVerifyParams parse_finite_verify(const nlohmann::json& j) {
  FieldReader r(j, "params");
  FiniteVerifyParams p;
  p.stationarity_instances = r.get<int>("stationarity_instances", p.stationarity_instances);
  p.equivalence_instances = r.get<int>("equivalence_instances", p.equivalence_instances);
  p.spectrum_instances = r.get<int>("spectrum_instances", p.spectrum_instances);
  p.metropolized_spectrum_instances =
      r.get<int>("metropolized_spectrum_instances", p.metropolized_spectrum_instances);
  p.infbound_instances = r.get<int>("infbound_instances", p.infbound_instances);
  p.max_states = r.get<int>("max_states", p.max_states);
  r.finish();
  check(p.stationarity_instances >= 0, "params.stationarity_instances: must be nonnegative");
  check(p.equivalence_instances >= 0, "params.equivalence_instances: must be nonnegative");
  check(p.spectrum_instances >= 0, "params.spectrum_instances: must be nonnegative");
  check(p.metropolized_spectrum_instances >= 0,
        "params.metropolized_spectrum_instances: must be nonnegative");
  check(p.infbound_instances >= 0, "params.infbound_instances: must be nonnegative");
  check(p.max_states >= 2, "params.max_states: must be at least 2");
  return p;
}

nlohmann::json finite_verify_to_json(const FiniteVerifyParams& p) {
  return {
      {"stationarity_instances", p.stationarity_instances},
      {"equivalence_instances", p.equivalence_instances},
      {"spectrum_instances", p.spectrum_instances},
      {"metropolized_spectrum_instances", p.metropolized_spectrum_instances},
      {"infbound_instances", p.infbound_instances},
      {"max_states", p.max_states},
  };
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  FieldReader r(j, "config");
  ExperimentConfig config;
  config.kind = kind_from_name(r.require<std::string>("experiment"));
  config.seed = r.require<std::uint64_t>("seed");
  const nlohmann::json params = r.take_object("params");
  r.finish();
  switch (config.kind) {
    case ExperimentKind::kMeanfield: config.meanfield = parse_meanfield(params); break;
    case ExperimentKind::kDoubleWellSample: config.double_well = parse_double_well(params); break;
    case ExperimentKind::kGPUnivariate: config.gp_univariate = parse_gp_univariate(params); break;
    case ExperimentKind::kGPMultivariate:
      config.gp_multivariate = parse_gp_multivariate(params);
      break;
    case ExperimentKind::kGPNonGaussian:
      config.gp_nongaussian = parse_gp_nongaussian(params);
      break;
    case ExperimentKind::kFiniteVerify: config.finite_verify = parse_finite_verify(params); break;
  }
  return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json params;
  switch (config.kind) {
    case ExperimentKind::kMeanfield: params = meanfield_to_json(config.meanfield); break;
    case ExperimentKind::kDoubleWellSample:
      params = double_well_to_json(config.double_well);
      break;
    case ExperimentKind::kGPUnivariate:
      params = gp_univariate_to_json(config.gp_univariate);
      break;
    case ExperimentKind::kGPMultivariate:
      params = gp_multivariate_to_json(config.gp_multivariate);
      break;
    case ExperimentKind::kGPNonGaussian:
      params = gp_nongaussian_to_json(config.gp_nongaussian);
      break;
    case ExperimentKind::kFiniteVerify:
      params = finite_verify_to_json(config.finite_verify);
      break;
  }
  return {{"experiment", kind_name(config.kind)}, {"seed", config.seed}, {"params", params}};
}

std::string config_hash_hex(const ExperimentConfig& config) {
  return hash_hex(fnv1a(config_to_json(config).dump()));
}

namespace {

// Shared per-step bookkeeping for the ensemble runners.
void record_step(RunRecord& record, const StepOutcome& outcome, double mean_value,
                 double cloned_value) {
  record.ensemble_mean_series.push_back(mean_value);
  record.cloned_walker_series.push_back(cloned_value);
  record.accepted_flags.push_back(outcome.accepted ? 1 : 0);
  record.teleport_flags.push_back(outcome.teleported ? 1 : 0);
  record.steps += 1;
  record.acceptances += outcome.accepted ? 1 : 0;
  record.teleports_proposed += outcome.teleported ? 1 : 0;
  record.teleports_accepted += (outcome.teleported && outcome.accepted) ? 1 : 0;
}

}  // namespace

SamplerRunResult run_double_well_sample(const DoubleWellSampleParams& params,
                                        std::uint64_t seed) {
  RandomSource rng(seed);
  const DoubleWellTarget target(params.beta);
  const GaussianKernel kernel(1, params.proposal_sigma * params.proposal_sigma);

  Eigen::MatrixXd walkers(1, params.n_walkers);
  for (int i = 0; i < params.n_walkers; ++i)
    walkers(0, i) = params.init_center + params.init_spread * rng.normal();
  WalkerEnsemble ensemble(walkers, target, kernel);

  SamplerRunResult result;
  result.record.n_walkers = params.n_walkers;
  result.record.seed = seed;
  result.record.ensemble_mean_series.reserve(params.steps);
  for (long step = 0; step < params.steps; ++step) {
    const StepOutcome outcome = ensemble_step(ensemble, target, kernel, rng);
    record_step(result.record, outcome, ensemble.walkers().row(0).mean(),
                ensemble.walkers()(0, outcome.clone_index));
  }
  result.final_walkers = ensemble.walkers();
  return result;
}

namespace {

SamplerRunResult run_plain_ensemble(const TargetDensity& target, const TransitionKernel& kernel,
                                    Eigen::MatrixXd initial_walkers, long steps,
                                    int summary_index, std::uint64_t seed, RandomSource& rng) {
  WalkerEnsemble ensemble(std::move(initial_walkers), target, kernel);
  SamplerRunResult result;
  result.record.n_walkers = ensemble.size();
  result.record.seed = seed;
  result.record.ensemble_mean_series.reserve(steps);
  for (long step = 0; step < steps; ++step) {
    const StepOutcome outcome = ensemble_step(ensemble, target, kernel, rng);
    record_step(result.record, outcome, ensemble.walkers().row(summary_index).mean(),
                ensemble.walkers()(summary_index, outcome.clone_index));
  }
  result.final_walkers = ensemble.walkers();
  return result;
}

}  // namespace

SamplerRunResult run_gp_univariate(const GPUnivariateParams& params, std::uint64_t seed,
                                   const GPDataset& data) {
  RandomSource rng(seed);
  const GPUnivariateTarget target(data, params.prior_scale);
  const GaussianKernel kernel(3, params.proposal_variance);
  Eigen::MatrixXd walkers(3, params.n_walkers);
  for (int i = 0; i < params.n_walkers; ++i)
    for (int c = 0; c < 3; ++c)
      walkers(c, i) = params.init_lo + (params.init_hi - params.init_lo) * rng.uniform();
  return run_plain_ensemble(target, kernel, std::move(walkers), params.steps,
                            params.summary_index, seed, rng);
}

SamplerRunResult run_gp_multivariate(const GPMultivariateParams& params, std::uint64_t seed,
                                     const GPDataset& data) {
  RandomSource rng(seed);
  const GPMultivariateTarget target(data, params.prior_scale);
  const int n = params.n;
  const int tril = n * (n + 1) / 2;
  const int dim = 2 + tril;

  Eigen::VectorXd variances(dim);
  variances[0] = params.proposal_variance_alpha;
  variances.segment(1, tril).setConstant(params.proposal_variance_metric);
  variances[dim - 1] = params.proposal_variance_sigma;
  const GaussianKernel kernel(variances);

  Eigen::MatrixXd walkers(dim, params.n_walkers);
  for (int i = 0; i < params.n_walkers; ++i) {
    walkers(0, i) = 0.5 + 1.5 * rng.uniform();  // alpha
    int k = 1;
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col <= row; ++col, ++k) {
        walkers(k, i) = row == col ? 0.5 + rng.uniform()        // chi-distributed diagonal
                                   : rng.uniform() - 0.5;       // standard-normal strict lower
      }
    }
    walkers(dim - 1, i) = 0.5 + 1.5 * rng.uniform();  // sigma
  }
  return run_plain_ensemble(target, kernel, std::move(walkers), params.steps,
                            params.summary_index, seed, rng);
}

SamplerRunResult run_gp_nongaussian(const GPNonGaussianParams& params, std::uint64_t seed,
                                    const GPDataset& data) {
  RandomSource rng(seed);
  const GPNonGaussianTarget target(data, params.nu, params.prior_scale);
  const int m = data.count();

  Eigen::VectorXd theta_variances(3);
  theta_variances << params.proposal_variance_alpha, params.proposal_variance_rho,
      params.proposal_variance_sigma;
  const GaussianKernel u_kernel(theta_variances);
  const GaussianKernel v_kernel(m, params.w_proposal_variance);

  Eigen::MatrixXd u(3, params.n_walkers);
  Eigen::MatrixXd v(m, params.n_walkers);
  for (int i = 0; i < params.n_walkers; ++i) {
    for (int c = 0; c < 3; ++c)
      u(c, i) = params.init_lo + (params.init_hi - params.init_lo) * rng.uniform();
    for (int r = 0; r < m; ++r) v(r, i) = 0.1 * rng.normal();
  }
  SplitEnsemble ensemble(std::move(u), std::move(v), target, u_kernel);

  SamplerRunResult result;
  result.record.n_walkers = params.n_walkers;
  result.record.seed = seed;
  result.record.ensemble_mean_series.reserve(params.steps);
  for (long step = 0; step < params.steps; ++step) {
    const AlternatingOutcome outcome =
        alternating_step(ensemble, target, u_kernel, v_kernel, params.n_inner, rng);
    record_step(result.record, outcome.interacting,
                ensemble.u_walkers().row(params.summary_index).mean(),
                ensemble.u_walkers()(params.summary_index, outcome.interacting.clone_index));
    result.record.inner_proposals += outcome.sweep.total_proposals();
    result.record.inner_acceptances += outcome.sweep.total_acceptances();
  }
  result.final_walkers.resize(3 + m, params.n_walkers);
  result.final_walkers << ensemble.u_walkers(), ensemble.v_walkers();
  return result;
}

TrajectoryRecord run_meanfield(const MeanfieldParams& params) {
  const Grid grid(params.grid_lo, params.grid_hi, params.grid_points);
  const double beta = params.beta;
  const GridDensity pi =
      GridDensity::from_function(grid, [beta](double x) { return std::exp(double_well_log(x, beta)); });
  const double mode = std::sqrt(0.5);
  const GridDensity rho0 = GridDensity::from_function(grid, [beta, mode](double x) {
    return 0.9 * std::exp(-10.0 * beta * (x + mode) * (x + mode)) +
           0.1 * std::exp(-10.0 * beta * (x - mode) * (x - mode));
  });

  const GridKernel proposal = build_grid_kernel(grid, params.sigma);
  IntegratorOptions options;
  options.dt = params.dt;
  options.t_end = params.t_end;
  options.record_stride = params.record_stride;
  options.snapshot_times = params.snapshot_times;

  if (params.dynamics == "nonlinear")
    return euler_integrate(DynamicsKind::kNonlinear, proposal, pi, rho0, options);
  const GridKernel metropolized = metropolize_kernel(proposal, pi);
  return euler_integrate(DynamicsKind::kLinear, metropolized, pi, rho0, options);
}

nlohmann::json run_finite_verify(const FiniteVerifyParams& params, std::uint64_t seed) {
  nlohmann::json report;
  bool all_pass = true;

  {  // Exact stationarity of the enumerated ensemble chain.
    double worst = 0.0;
    for (int k = 0; k < params.stationarity_instances; ++k) {
      const std::uint64_t instance_seed = RandomSource::substream_seed(seed, 0, k);
      RandomSource rng(instance_seed);
      const int S = 2 + k % 3;
      const int N = 1 + (k / 3) % 3;
      const FiniteInstance instance = random_finite_instance(S, rng);
      const Eigen::MatrixXd P = exact_ensemble_transition_matrix(instance, N);
      const Eigen::VectorXd Pi = ensemble_product_distribution(instance, N);
      worst = std::max(worst, (P * Pi - Pi).cwiseAbs().maxCoeff());
    }
    const bool pass = worst < 1e-12;
    all_pass = all_pass && pass;
    report["stationarity"] = {{"instances", params.stationarity_instances},
                              {"max_error", worst},
                              {"pass", pass}};
  }

  {  // Simplified acceptance equals the raw MH ratio capped at 1.
    double worst = 0.0;
    for (int k = 0; k < params.equivalence_instances; ++k) {
      const std::uint64_t instance_seed = RandomSource::substream_seed(seed, 1, k);
      RandomSource rng(instance_seed);
      const int S = 2 + k % 3;
      const int N = 1 + k % 3;
      const FiniteInstance instance = random_finite_instance(S, rng);
      const TabulatedTarget target(instance.pi);
      const TabulatedKernel kernel(instance.q);
      Eigen::MatrixXd walkers(1, N);
      for (int i = 0; i < N; ++i) walkers(0, i) = rng.uniform_int(S);
      const WalkerEnsemble ensemble(walkers, target, kernel);
      const Eigen::VectorXd z = TabulatedTarget::state_vector(rng.uniform_int(S));
      const int i = rng.uniform_int(N);
      const double accept = acceptance_probability(ensemble, i, z, target, kernel);
      Eigen::MatrixXd primed_walkers = walkers;
      primed_walkers(0, i) = z[0];
      const WalkerEnsemble primed(primed_walkers, target, kernel);
      const double oracle =
          std::min(1.0, full_mh_ratio_oracle(ensemble, primed, target, kernel, i));
      worst = std::max(worst, std::abs(oracle - accept) / std::max(accept, 1e-300));
    }
    const bool pass = worst < 1e-10;
    all_pass = all_pass && pass;
    report["acceptance_ratio_equivalence"] = {{"instances", params.equivalence_instances},
                                        {"max_relative_error", worst},
                                        {"pass", pass}};
  }

  {  // Jacobian spectrum: negative real eigenvalues and the alpha bound.
    nlohmann::json entries = nlohmann::json::array();
    bool pass = true;
    for (int k = 0; k < params.spectrum_instances; ++k) {
      const std::uint64_t instance_seed = RandomSource::substream_seed(seed, 2, k);
      RandomSource rng(instance_seed);
      const int S = 2 + k % (params.max_states - 1);
      const FiniteInstance instance = random_finite_instance(S, rng);
      const SpectrumReport r = jacobian_spectrum_check(instance);
      pass = pass && r.pass;
      nlohmann::json entry = {{"instance_seed", instance_seed},
                              {"eigenvalues", std::vector<double>(
                                                  r.eigenvalues.data(),
                                                  r.eigenvalues.data() + r.eigenvalues.size())},
                              {"alpha", r.alpha},
                              {"bound", r.bound},
                              {"pass", r.pass}};
      entries.push_back(std::move(entry));
    }
    double metro_worst = 0.0;
    for (int k = 0; k < params.metropolized_spectrum_instances; ++k) {
      const std::uint64_t instance_seed = RandomSource::substream_seed(seed, 3, k);
      RandomSource rng(instance_seed);
      const int S = 2 + k % (params.max_states - 1);
      const FiniteInstance instance = metropolize_instance(random_finite_instance(S, rng));
      const SpectrumReport r = jacobian_spectrum_check(instance);
      pass = pass && r.pass;
      metro_worst =
          std::max(metro_worst, (r.eigenvalues.array() + 1.0).abs().maxCoeff());
    }
    pass = pass && metro_worst < 1e-10;
    all_pass = all_pass && pass;
    report["spectrum"] = {{"instances", params.spectrum_instances},
                          {"metropolized_instances", params.metropolized_spectrum_instances},
                          {"metropolized_max_deviation_from_minus_one", metro_worst},
                          {"reports", std::move(entries)},
                          {"pass", pass}};
  }

  {  // Variance-ratio bound.
    bool pass = true;
    double worst_margin = 0.0;
    for (int k = 0; k < params.infbound_instances; ++k) {
      const std::uint64_t instance_seed = RandomSource::substream_seed(seed, 4, k);
      RandomSource rng(instance_seed);
      const int S = 2 + k % (params.max_states - 1);
      const FiniteInstance instance = random_finite_instance(S, rng);
      const Eigen::VectorXd rho = random_density(S, rng);
      const VarianceRatioReport r = variance_ratio_bound_check(instance, rho);
      pass = pass && r.pass;
      if (!r.degenerate) worst_margin = std::max(worst_margin, r.ratio - r.bound);
    }
    all_pass = all_pass && pass;
    report["variance_ratio_bound"] = {{"instances", params.infbound_instances},
                                      {"worst_margin", worst_margin},
                                      {"pass", pass}};
  }

  report["pass"] = all_pass;
  return report;
}

void write_run_record_csv(const RunRecord& record, std::ostream& os,
                          const std::string& config_hash, std::uint64_t seed) {
  os << "# config_hash=" << config_hash << " seed=" << seed << "\n";
  os << "step,ensemble_mean,cloned_value,accepted,teleported\n";
  for (long k = 0; k < record.steps; ++k) {
    os << k << ',' << format_real(record.ensemble_mean_series[k]) << ','
       << format_real(record.cloned_walker_series[k]) << ','
       << int(record.accepted_flags[k]) << ',' << int(record.teleport_flags[k]) << '\n';
  }
}

RunRecord read_run_record_csv(std::istream& is) {
  RunRecord record;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto hash_pos = line.find("config_hash=");
      if (hash_pos != std::string::npos) {
        const auto end = line.find(' ', hash_pos);
        record.config_hash = line.substr(hash_pos + 12, end - hash_pos - 12);
      }
      const auto seed_pos = line.find("seed=");
      if (seed_pos != std::string::npos)
        record.seed = std::strtoull(line.c_str() + seed_pos + 5, nullptr, 10);
      continue;
    }
    if (!header_seen) {
      if (line.rfind("step,", 0) != 0)
        throw std::invalid_argument("run record CSV: missing column header");
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::invalid_argument("run record CSV: bad row width");
    const double mean = std::stod(cells[1]);
    const double cloned = std::stod(cells[2]);
    const bool accepted = std::stoi(cells[3]) != 0;
    const bool teleported = std::stoi(cells[4]) != 0;
    record.ensemble_mean_series.push_back(mean);
    record.cloned_walker_series.push_back(cloned);
    record.accepted_flags.push_back(accepted ? 1 : 0);
    record.teleport_flags.push_back(teleported ? 1 : 0);
    record.steps += 1;
    record.acceptances += accepted ? 1 : 0;
    record.teleports_proposed += teleported ? 1 : 0;
    record.teleports_accepted += (accepted && teleported) ? 1 : 0;
  }
  if (record.steps == 0) throw std::invalid_argument("run record CSV: no data rows");
  return record;
}

namespace {

nlohmann::json statistics_to_json(const RunStatistics& stats) {
  return {
      {"A", stats.acceptance_rate},
      {"T_proposed", stats.teleport_proposed_rate},
      {"T_accepted", stats.teleport_accepted_rate},
      {"tau", stats.iat.tau},
      {"normalized_tau", stats.iat.normalized_tau},
      {"window", stats.iat.window},
      {"window_converged", stats.iat.converged},
      {"burn_in_discarded", stats.burn_in_discarded},
  };
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << contents;
}

std::string dataset_csv_string(const GPDataset& data) {
  std::ostringstream os;
  write_dataset_csv(data, os);
  return os.str();
}

nlohmann::json run_sampler_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir,
                                      const std::string& hash) {
  SamplerRunResult result;
  double burn_in = 0.1;
  double window_c = 5.0;
  std::optional<GPDataset> dataset;
  std::uint64_t dataset_seed = 0;

  switch (config.kind) {
    case ExperimentKind::kDoubleWellSample: {
      result = run_double_well_sample(config.double_well, config.seed);
      burn_in = config.double_well.burn_in_fraction;
      window_c = config.double_well.window_c;
      break;
    }
    case ExperimentKind::kGPUnivariate: {
      RandomSource data_rng(config.gp_univariate.dataset_seed);
      dataset = generate_synthetic_data(1, config.gp_univariate.m, data_rng);
      dataset_seed = config.gp_univariate.dataset_seed;
      result = run_gp_univariate(config.gp_univariate, config.seed, *dataset);
      burn_in = config.gp_univariate.burn_in_fraction;
      window_c = config.gp_univariate.window_c;
      break;
    }
    case ExperimentKind::kGPMultivariate: {
      RandomSource data_rng(config.gp_multivariate.dataset_seed);
      dataset = generate_synthetic_data(config.gp_multivariate.n, config.gp_multivariate.m,
                                        data_rng);
      dataset_seed = config.gp_multivariate.dataset_seed;
      result = run_gp_multivariate(config.gp_multivariate, config.seed, *dataset);
      burn_in = config.gp_multivariate.burn_in_fraction;
      window_c = config.gp_multivariate.window_c;
      break;
    }
    case ExperimentKind::kGPNonGaussian: {
      RandomSource data_rng(config.gp_nongaussian.dataset_seed);
      dataset = generate_synthetic_data(1, config.gp_nongaussian.m, data_rng);
      dataset_seed = config.gp_nongaussian.dataset_seed;
      result = run_gp_nongaussian(config.gp_nongaussian, config.seed, *dataset);
      burn_in = config.gp_nongaussian.burn_in_fraction;
      window_c = config.gp_nongaussian.window_c;
      break;
    }
    default:
      throw std::logic_error("run_sampler_experiment: not a sampler experiment");
  }

  result.record.config_hash = hash;
  {
    std::ostringstream os;
    write_run_record_csv(result.record, os, hash, config.seed);
    write_text_file(out_dir / "runrecord.csv", os.str());
  }

  nlohmann::json summary = {
      {"experiment", kind_name(config.kind)},
      {"config_hash", hash},
      {"seed", config.seed},
      {"steps", result.record.steps},
      {"n_walkers", result.record.n_walkers},
  };
  if (dataset) {
    // The hash covers the raw table, so it identifies the dataset independently
    // of which config generated it.
    const std::string csv = dataset_csv_string(*dataset);
    summary["dataset_hash"] = hash_hex(fnv1a(csv));
    summary["dataset_seed"] = dataset_seed;
    write_text_file(out_dir / "dataset.csv",
                    "# config_hash=" + hash + " seed=" + std::to_string(config.seed) +
                        " dataset_seed=" + std::to_string(dataset_seed) + "\n" + csv);
  }
  if (result.record.inner_proposals > 0) {
    summary["inner_proposals"] = result.record.inner_proposals;
    summary["inner_acceptance_rate"] =
        static_cast<double>(result.record.inner_acceptances) /
        static_cast<double>(result.record.inner_proposals);
  }
  summary["statistics"] = statistics_to_json(run_statistics(result.record, burn_in, window_c));
  return summary;
}

nlohmann::json run_meanfield_experiment(const ExperimentConfig& config,
                                        const std::filesystem::path& out_dir,
                                        const std::string& hash) {
  const TrajectoryRecord record = run_meanfield(config.meanfield);

  std::ostringstream os;
  os << "# config_hash=" << hash << " seed=" << config.seed << "\n";
  os << "t,E,chi2,min_rho\n";
  for (std::size_t k = 0; k < record.times.size(); ++k) {
    os << format_real(record.times[k]) << ',' << format_real(record.e_stat[k]) << ','
       << format_real(record.chi2[k]) << ',' << format_real(record.min_rho[k]) << '\n';
  }
  write_text_file(out_dir / "trajectory.csv", os.str());

  if (!record.snapshots.empty()) {
    const Grid grid(config.meanfield.grid_lo, config.meanfield.grid_hi,
                    config.meanfield.grid_points);
    std::ostringstream snap;
    snap << "# config_hash=" << hash << " seed=" << config.seed << "\n";
    snap << "t,x,rho\n";
    for (const Snapshot& s : record.snapshots) {
      for (int g = 0; g < grid.points(); ++g) {
        snap << format_real(s.t) << ',' << format_real(grid.nodes()[g]) << ','
             << format_real(s.rho[g]) << '\n';
      }
    }
    write_text_file(out_dir / "snapshots.csv", snap.str());
  }

  double max_mass_error = 0.0;
  for (double m : record.mass) max_mass_error = std::max(max_mass_error, std::abs(m - 1.0));
  double min_rho_overall = 0.0;
  for (double v : record.min_rho) min_rho_overall = std::min(min_rho_overall, v);

  nlohmann::json summary = {
      {"experiment", "meanfield"},
      {"config_hash", hash},
      {"seed", config.seed},
      {"dynamics", config.meanfield.dynamics},
      {"final_e", record.e_stat.back()},
      {"final_chi2", record.chi2.back()},
      {"max_mass_error", max_mass_error},
      {"min_rho_overall", min_rho_overall},
  };
  try {
    const DecayFit fit = fit_decay_rate(record.times, record.e_stat);
    summary["e_fit"] = {{"rate", fit.rate},
                        {"intercept", fit.intercept},
                        {"r_squared", fit.r_squared},
                        {"points", fit.points}};
  } catch (const InsufficientWindow&) {
    summary["e_fit"] = nullptr;
  }
  return summary;
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& config,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string hash = config_hash_hex(config);
  write_text_file(out_dir / "config.json", config_to_json(config).dump(2) + "\n");

  nlohmann::json summary;
  switch (config.kind) {
    case ExperimentKind::kMeanfield:
      summary = run_meanfield_experiment(config, out_dir, hash);
      break;
    case ExperimentKind::kFiniteVerify: {
      summary = run_finite_verify(config.finite_verify, config.seed);
      summary["experiment"] = "finite_verify";
      summary["config_hash"] = hash;
      summary["seed"] = config.seed;
      write_text_file(out_dir / "verify.json", summary.dump(2) + "\n");
      break;
    }
    default:
      summary = run_sampler_experiment(config, out_dir, hash);
      break;
  }
  write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace telemc
