#ifndef TELEMC_DIAGNOSTICS_HPP
#define TELEMC_DIAGNOSTICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace telemc {

// Per-step record of one sampler run. One step is one walker move; the mean
// series averages the designated scalar summary over the ensemble, while the
// cloned series tracks the summary at the walker that was cloned.
struct RunRecord {
  std::vector<double> ensemble_mean_series;
  std::vector<double> cloned_walker_series;
  std::vector<std::uint8_t> accepted_flags;
  std::vector<std::uint8_t> teleport_flags;  // deletion != clone among proposals
  long steps = 0;
  long acceptances = 0;
  long teleports_proposed = 0;
  long teleports_accepted = 0;
  long inner_proposals = 0;    // subset scheme only
  long inner_acceptances = 0;  // subset scheme only
  int n_walkers = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct IATResult {
  double tau = 0.0;
  int window = 0;
  double normalized_tau = 0.0;  // tau / N
  bool converged = true;        // false when no window < length/2 satisfied W >= c tau(W)
};

// Sokal-windowed integrated autocorrelation time:
//   tau(W) = 1 + 2 sum_{k=1}^{W} c_k / c_0,
// evaluated at the smallest W with W >= c tau(W). Autocorrelations are
// mean-removed and computed by FFT. The series must have at least 100 points
// and must not be constant. A window that never satisfies the criterion below
// length/2 is reported with converged = false rather than thrown.
IATResult integrated_autocorrelation_time(const std::vector<double>& series,
                                          double window_c = 5.0, int n_walkers = 1);

struct RunStatistics {
  double acceptance_rate = 0.0;
  double teleport_proposed_rate = 0.0;
  double teleport_accepted_rate = 0.0;
  IATResult iat;  // of the ensemble mean series after burn-in removal
  long burn_in_discarded = 0;
};

RunStatistics run_statistics(const RunRecord& record, double burn_in_fraction = 0.1,
                             double window_c = 5.0);

}  // namespace telemc

#endif
