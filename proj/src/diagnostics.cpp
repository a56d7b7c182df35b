#include "telemc/diagnostics.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace telemc {

namespace {

// Normalized autocorrelations c_k / c_0 for k = 0..n-1 via zero-padded FFT.
std::vector<double> autocorrelations(const std::vector<double>& series) {
  const std::size_t n = series.size();
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> buffer(padded, 0.0);
  for (std::size_t k = 0; k < n; ++k) buffer[k] = series[k] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, buffer);
  for (auto& f : freq) f = std::norm(f);
  std::vector<std::complex<double>> corr;
  fft.inv(corr, freq);

  const double c0 = corr[0].real();
  std::vector<double> rho(n);
  if (c0 <= 0.0) throw std::invalid_argument("autocorrelations: series is constant");
  for (std::size_t k = 0; k < n; ++k) rho[k] = corr[k].real() / c0;
  return rho;
}

}  // namespace

IATResult integrated_autocorrelation_time(const std::vector<double>& series, double window_c,
                                          int n_walkers) {
  const std::size_t n = series.size();
  if (n < 100)
    throw std::invalid_argument("integrated_autocorrelation_time: series shorter than 100");
  if (n_walkers < 1)
    throw std::invalid_argument("integrated_autocorrelation_time: n_walkers must be >= 1");

  const std::vector<double> rho = autocorrelations(series);

  IATResult result;
  const std::size_t limit = n / 2;
  double tau = 1.0;
  std::size_t window = limit;
  bool converged = false;
  double cumulative = 0.0;
  for (std::size_t w = 1; w < limit; ++w) {
    cumulative += rho[w];
    tau = 1.0 + 2.0 * cumulative;
    if (static_cast<double>(w) >= window_c * tau) {
      window = w;
      converged = true;
      break;
    }
  }
  result.tau = tau;
  result.window = static_cast<int>(window);
  result.converged = converged;
  result.normalized_tau = tau / static_cast<double>(n_walkers);
  return result;
}

RunStatistics run_statistics(const RunRecord& record, double burn_in_fraction,
                             double window_c) {
  if (record.steps <= 0) throw std::invalid_argument("run_statistics: empty record");
  if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0)
    throw std::invalid_argument("run_statistics: burn_in_fraction must lie in [0, 1)");

  RunStatistics stats;
  const double steps = static_cast<double>(record.steps);
  stats.acceptance_rate = static_cast<double>(record.acceptances) / steps;
  stats.teleport_proposed_rate = static_cast<double>(record.teleports_proposed) / steps;
  stats.teleport_accepted_rate = static_cast<double>(record.teleports_accepted) / steps;

  const std::size_t total = record.ensemble_mean_series.size();
  const std::size_t skip = static_cast<std::size_t>(burn_in_fraction * total);
  stats.burn_in_discarded = static_cast<long>(skip);
  const std::vector<double> tail(record.ensemble_mean_series.begin() + skip,
                                 record.ensemble_mean_series.end());
  stats.iat = integrated_autocorrelation_time(tail, window_c, record.n_walkers);
  return stats;
}

}  // namespace telemc
