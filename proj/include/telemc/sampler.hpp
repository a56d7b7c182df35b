#ifndef TELEMC_SAMPLER_HPP
#define TELEMC_SAMPLER_HPP

#include <utility>

#include <Eigen/Dense>

#include "telemc/ensemble.hpp"
#include "telemc/errors.hpp"
#include "telemc/random.hpp"
#include "telemc/target.hpp"

namespace telemc {

// Normalized deletion weights w_i(x, z) together with the unnormalized total
// Z(x, z). Everything is computed in log space with max-subtraction; the
// linear-space fields are exponentials of the log quantities and may over- or
// underflow on extreme targets, in which case log_z remains authoritative.
struct WeightComputation {
  Eigen::VectorXd weights;         // sums to 1
  Eigen::VectorXd log_numerators;  // log of [q(x_i|z) + sum_{k!=i} q(x_i|x_k)] / pi(x_i)
  Eigen::VectorXd q_to_walkers;    // q(x_i | z), reused by the acceptance step
  double log_z = 0.0;

  double z_value() const { return std::exp(log_z); }
  Eigen::VectorXd per_walker_numerators() const {
    return log_numerators.array().exp();
  }
};

struct StepOutcome {
  int clone_index = -1;
  int deletion_index = -1;
  Eigen::VectorXd proposed_point;
  bool accepted = false;
  bool teleported = false;  // deletion and clone indices differ (proposed move)
  double acceptance_probability = 0.0;
  // Proposal landed outside the target support and was rejected before the
  // deletion draw; deletion_index equals clone_index in that case.
  bool out_of_support = false;
};

struct SamplerOptions {
  // Full O(N^2) cache rebuild whenever generation is a positive multiple of
  // this; 0 disables scheduled rebuilds.
  std::int64_t cache_rebuild_interval = 10000;
};

// Uniformly selects a clone index j and draws z ~ q(.|x_j). The ensemble is
// not modified.
std::pair<int, Eigen::VectorXd> propose_clone(const WalkerEnsemble& ensemble,
                                              const TransitionKernel& kernel,
                                              RandomSource& rng);

// Deletion weights w_i(x, z) = [q(x_i|z) + sum_{k!=i} q(x_i|x_k)] / pi(x_i) / Z(x, z).
// Requires all cached log pi finite. Throws NonFiniteWeight if a numerator is
// non-finite or all numerators vanish.
WeightComputation importance_weights(const WalkerEnsemble& ensemble, const Eigen::VectorXd& z,
                                     const TargetDensity& target, const TransitionKernel& kernel);

// min(1, Z(x, z) / Z(x', x_i)) where x' replaces walker deletion_index by z.
// Returns 0 when z lies outside the target support (installing it would leave
// an invalid state). Throws NonFiniteRatio when either Z is zero or non-finite.
double acceptance_probability(const WalkerEnsemble& ensemble, int deletion_index,
                              const Eigen::VectorXd& z, const TargetDensity& target,
                              const TransitionKernel& kernel);

// One step of the teleporting ensemble chain: clone proposal, deletion draw
// by importance weights, simplified Metropolis-Hastings accept/reject, and
// incremental cache update on acceptance. The generation counter advances
// whether or not the move is accepted.
StepOutcome ensemble_step(WalkerEnsemble& ensemble, const TargetDensity& target,
                          const TransitionKernel& kernel, RandomSource& rng,
                          const SamplerOptions& options = {});

// Raw Metropolis-Hastings ratio Pi(x') Q(x|x') / (Pi(x) Q(x'|x)) computed by
// direct evaluation of the proposal likelihood (deletion weight times the
// clone mixture density), independently of the cached sampler path. The two
// ensembles must differ on exactly one index; pass replaced_index to
// disambiguate when they are equal (a walker replaced by itself).
double full_mh_ratio_oracle(const WalkerEnsemble& ensemble, const WalkerEnsemble& proposed,
                            const TargetDensity& target, const TransitionKernel& kernel,
                            int replaced_index = -1);

namespace detail {

// log(sum exp(s_i)) with max-subtraction; -inf when every entry is -inf.
double log_sum_exp(const Eigen::VectorXd& s);

// Inverse-CDF categorical draw from normalized weights using one uniform.
int categorical_draw(const Eigen::VectorXd& weights, double u);

}  // namespace detail

}  // namespace telemc

#endif
