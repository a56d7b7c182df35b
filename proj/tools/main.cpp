// Command-line runner for the teleporting-walker ensemble sampler, its
// mean-field simulator, and the finite-state verification suites.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "telemc/diagnostics.hpp"
#include "telemc/errors.hpp"
#include "telemc/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitNumericalError = 2;

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                const std::string& out_dir) {
  std::ifstream is(config_path);
  if (!is) {
    std::cerr << "error: cannot open config file '" << config_path << "'\n";
    return kExitConfigError;
  }
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
    return kExitConfigError;
  }
  telemc::ExperimentConfig config = telemc::parse_config(j);
  if (seed_override) config.seed = *seed_override;
  const nlohmann::json summary = telemc::run_experiment(config, out_dir);
  std::cout << summary.dump(2) << "\n";
  if (config.kind == telemc::ExperimentKind::kFiniteVerify &&
      !summary.at("pass").get<bool>())
    return kExitNumericalError;
  return kExitOk;
}

int verify_command(std::uint64_t seed, const std::string& out_dir) {
  telemc::ExperimentConfig config;
  config.kind = telemc::ExperimentKind::kFiniteVerify;
  config.seed = seed;
  const nlohmann::json summary = telemc::run_experiment(config, out_dir);
  const auto line = [&](const char* name, const nlohmann::json& suite) {
    std::cout << (suite.at("pass").get<bool>() ? "[PASS] " : "[FAIL] ") << name << "\n";
  };
  line("exact stationarity", summary.at("stationarity"));
  line("acceptance-ratio equivalence", summary.at("acceptance_ratio_equivalence"));
  line("Jacobian spectrum", summary.at("spectrum"));
  line("variance-ratio bound", summary.at("variance_ratio_bound"));
  return summary.at("pass").get<bool>() ? kExitOk : kExitNumericalError;
}

int iat_command(const std::string& csv_path, int n_walkers, double burn_in, double window_c) {
  std::ifstream is(csv_path);
  if (!is) {
    std::cerr << "error: cannot open run record '" << csv_path << "'\n";
    return kExitConfigError;
  }
  telemc::RunRecord record = telemc::read_run_record_csv(is);
  record.n_walkers = n_walkers;
  const telemc::RunStatistics stats = telemc::run_statistics(record, burn_in, window_c);
  const nlohmann::json out = {
      {"A", stats.acceptance_rate},
      {"T_proposed", stats.teleport_proposed_rate},
      {"T_accepted", stats.teleport_accepted_rate},
      {"tau", stats.iat.tau},
      {"normalized_tau", stats.iat.normalized_tau},
      {"window", stats.iat.window},
      {"window_converged", stats.iat.converged},
  };
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teleporting-walker ensemble MCMC toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_path, "config JSON file")->required();
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--out", out_dir, "output directory");

  std::uint64_t verify_seed = 1;
  std::string verify_out = "out";
  auto* verify = app.add_subcommand("verify", "run the finite-state verification sweep");
  verify->add_option("--seed", verify_seed, "sweep seed");
  verify->add_option("--out", verify_out, "output directory");

  std::string csv_path;
  int n_walkers = 1;
  double burn_in = 0.1;
  double window_c = 5.0;
  auto* iat = app.add_subcommand("iat", "summarize a run record CSV");
  iat->add_option("runrecord", csv_path, "run record CSV file")->required();
  iat->add_option("--n-walkers", n_walkers, "walker count used for the 1/N normalization")
      ->required();
  iat->add_option("--burn-in", burn_in, "burn-in fraction discarded before the IAT");
  iat->add_option("--window-c", window_c, "Sokal window constant");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, seed_override, out_dir);
    if (verify->parsed()) return verify_command(verify_seed, verify_out);
    if (iat->parsed()) return iat_command(csv_path, n_walkers, burn_in, window_c);
  } catch (const telemc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const telemc::Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumericalError;
  }
  return kExitOk;
}
