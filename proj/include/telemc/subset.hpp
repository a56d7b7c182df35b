#ifndef TELEMC_SUBSET_HPP
#define TELEMC_SUBSET_HPP

#include <cstdint>

#include <Eigen/Dense>

#include "telemc/sampler.hpp"
#include "telemc/target.hpp"

namespace telemc {

// Ensemble split into an interacting u-block and an independently updated
// v-block; the target is the joint density evaluated on the concatenated
// state (u_i, v_i). The cached kernel sums cover the u-block only.
class SplitEnsemble {
 public:
  SplitEnsemble(Eigen::MatrixXd u, Eigen::MatrixXd v, const TargetDensity& target,
                const TransitionKernel& u_kernel);

  int size() const { return static_cast<int>(u_.cols()); }
  int u_dim() const { return static_cast<int>(u_.rows()); }
  int v_dim() const { return static_cast<int>(v_.rows()); }
  std::int64_t generation() const { return generation_; }
  std::int64_t sweeps_done() const { return sweeps_done_; }

  const Eigen::MatrixXd& u_walkers() const { return u_; }
  const Eigen::MatrixXd& v_walkers() const { return v_; }
  const Eigen::VectorXd& cached_log_pi() const { return cached_log_pi_; }
  const Eigen::VectorXd& cached_u_kernel_sums() const { return u_kernel_sums_; }

  Eigen::VectorXd joint_state(int i) const;
  Eigen::VectorXd joint_state_with_u(const Eigen::VectorXd& u, int i) const;
  Eigen::VectorXd joint_state_with_v(int i, const Eigen::VectorXd& v) const;

  void replace_u_walker(int i, const Eigen::VectorXd& z, double log_pi_z,
                        Eigen::VectorXd new_kernel_sums);
  void set_v_walker(int i, const Eigen::VectorXd& v, double log_pi);
  void bump_generation() { ++generation_; }
  void bump_sweeps() { ++sweeps_done_; }

  void recompute_caches(const TargetDensity& target, const TransitionKernel& u_kernel);
  double max_kernel_sum_error(const TransitionKernel& u_kernel) const;

 private:
  Eigen::MatrixXd u_;  // du x N
  Eigen::MatrixXd v_;  // dv x N (dv may be zero)
  Eigen::VectorXd cached_log_pi_;
  Eigen::VectorXd u_kernel_sums_;
  std::int64_t generation_ = 0;
  std::int64_t sweeps_done_ = 0;
};

// Deletion weights with the extra pi_{v_i}(z) factor that makes the stage
// independent of the relative normalizations of the conditionals:
//   w_i = pi(z, v_i) [q(u_i|z) + sum_{k!=i} q(u_i|u_k)] / pi(u_i, v_i) / Z_v.
struct SubsetWeightComputation {
  Eigen::VectorXd weights;
  Eigen::VectorXd log_numerators;
  Eigen::VectorXd q_to_walkers;  // q(u_i | z)
  Eigen::VectorXd log_pi_z_v;    // log pi(z, v_i)
  double log_z = 0.0;

  double z_value() const { return std::exp(log_z); }
  Eigen::VectorXd per_walker_numerators() const { return log_numerators.array().exp(); }
};

SubsetWeightComputation subset_weights(const SplitEnsemble& ensemble, const Eigen::VectorXd& z,
                                       const TargetDensity& target,
                                       const TransitionKernel& u_kernel);

// min(1, [pi(u_i,v_i)/pi(z,v_i)] Z_v(u,z) / Z_v(u',u_i)); 0 when (z, v_i) is
// out of support.
double subset_acceptance_probability(const SplitEnsemble& ensemble, int deletion_index,
                                     const Eigen::VectorXd& z, const TargetDensity& target,
                                     const TransitionKernel& u_kernel);

// One teleport attempt on the u-block with v held fixed.
StepOutcome interacting_step(SplitEnsemble& ensemble, const TargetDensity& target,
                             const TransitionKernel& u_kernel, RandomSource& rng,
                             const SamplerOptions& options = {});

struct SweepStats {
  Eigen::VectorXi acceptances;  // per walker
  int proposals_per_walker = 0;

  long total_acceptances() const { return acceptances.sum(); }
  long total_proposals() const {
    return static_cast<long>(proposals_per_walker) * acceptances.size();
  }
};

// n_inner Metropolis-Hastings updates of each v_i targeting pi(u_i, .) with
// proposal r, independently per walker on deterministic sub-streams derived
// from (master seed, sweep counter, walker index).
SweepStats independent_sweep(SplitEnsemble& ensemble, const TargetDensity& target,
                             const TransitionKernel& v_kernel, int n_inner, RandomSource& rng);

struct AlternatingOutcome {
  StepOutcome interacting;
  SweepStats sweep;
};

// One interacting stage followed by one independent sweep.
AlternatingOutcome alternating_step(SplitEnsemble& ensemble, const TargetDensity& target,
                                    const TransitionKernel& u_kernel,
                                    const TransitionKernel& v_kernel, int n_inner,
                                    RandomSource& rng, const SamplerOptions& options = {});

}  // namespace telemc

#endif
