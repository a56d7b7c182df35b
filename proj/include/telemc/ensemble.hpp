#ifndef TELEMC_ENSEMBLE_HPP
#define TELEMC_ENSEMBLE_HPP

#include <cstdint>

#include <Eigen/Dense>

#include "telemc/target.hpp"

namespace telemc {

// N walkers stored one per column, with cached per-walker log-densities
// log pi(x_i) and pairwise kernel-density sums sum_{k != i} q(x_i | x_k).
// The kernel sums are kept in linear space and updated incrementally when a
// walker is replaced; recompute_caches() rebuilds both from scratch.
class WalkerEnsemble {
 public:
  WalkerEnsemble(Eigen::MatrixXd walkers, const TargetDensity& target,
                 const TransitionKernel& kernel);

  int size() const { return static_cast<int>(walkers_.cols()); }
  int dim() const { return static_cast<int>(walkers_.rows()); }
  std::int64_t generation() const { return generation_; }

  const Eigen::MatrixXd& walkers() const { return walkers_; }
  Eigen::VectorXd walker(int i) const { return walkers_.col(i); }
  const Eigen::VectorXd& cached_log_pi() const { return cached_log_pi_; }
  const Eigen::VectorXd& cached_kernel_sums() const { return cached_kernel_sums_; }

  // Installs z at index i together with its precomputed cache columns.
  void replace_walker(int i, const Eigen::VectorXd& z, double log_pi_z,
                      Eigen::VectorXd new_kernel_sums);
  void bump_generation() { ++generation_; }

  void recompute_caches(const TargetDensity& target, const TransitionKernel& kernel);

  // Largest relative deviation of the cached kernel sums from a fresh
  // double-loop recomputation; used by drift tests and assertions.
  double max_kernel_sum_error(const TransitionKernel& kernel) const;

  static Eigen::VectorXd direct_kernel_sums(const Eigen::MatrixXd& walkers,
                                            const TransitionKernel& kernel);

 private:
  Eigen::MatrixXd walkers_;  // dim x N
  Eigen::VectorXd cached_log_pi_;
  Eigen::VectorXd cached_kernel_sums_;
  std::int64_t generation_ = 0;
};

}  // namespace telemc

#endif
