#include "telemc/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace telemc {

WalkerEnsemble::WalkerEnsemble(Eigen::MatrixXd walkers, const TargetDensity& target,
                               const TransitionKernel& kernel)
    : walkers_(std::move(walkers)) {
  if (walkers_.cols() < 1) throw std::invalid_argument("WalkerEnsemble: N must be >= 1");
  if (walkers_.rows() != target.dim())
    throw std::invalid_argument("WalkerEnsemble: walker dimension does not match target");
  recompute_caches(target, kernel);
}

Eigen::VectorXd WalkerEnsemble::direct_kernel_sums(const Eigen::MatrixXd& walkers,
                                                   const TransitionKernel& kernel) {
  const int n = static_cast<int>(walkers.cols());
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      sums[i] += std::exp(kernel.log_density(walkers.col(i), walkers.col(k)));
    }
  }
  return sums;
}

void WalkerEnsemble::recompute_caches(const TargetDensity& target,
                                      const TransitionKernel& kernel) {
  const int n = size();
  cached_log_pi_.resize(n);
  for (int i = 0; i < n; ++i) cached_log_pi_[i] = target.log_unnorm(walkers_.col(i));
  cached_kernel_sums_ = direct_kernel_sums(walkers_, kernel);
}

void WalkerEnsemble::replace_walker(int i, const Eigen::VectorXd& z, double log_pi_z,
                                    Eigen::VectorXd new_kernel_sums) {
  walkers_.col(i) = z;
  cached_log_pi_[i] = log_pi_z;
  cached_kernel_sums_ = std::move(new_kernel_sums);
}

double WalkerEnsemble::max_kernel_sum_error(const TransitionKernel& kernel) const {
  const Eigen::VectorXd direct = direct_kernel_sums(walkers_, kernel);
  double worst = 0.0;
  for (int i = 0; i < size(); ++i) {
    const double scale = std::max(std::abs(direct[i]), 1e-300);
    worst = std::max(worst, std::abs(cached_kernel_sums_[i] - direct[i]) / scale);
  }
  return worst;
}

}  // namespace telemc
