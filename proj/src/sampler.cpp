#include "telemc/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace telemc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool same_point(const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b) {
  return (a.array() == b.array()).all();
}

// Everything needed to finish a step once the deletion index is fixed:
// the simplified MH ratio in log space and the proposed ensemble's caches,
// reusable for the incremental update on acceptance.
struct AcceptanceComputation {
  double acceptance = 0.0;
  double log_pi_z = kNegInf;
  Eigen::VectorXd primed_kernel_sums;
  bool identity_move = false;
};

// q_to_walkers[l] = q(x_l | z) from the weight computation; recomputed here
// when the caller does not have it.
AcceptanceComputation compute_acceptance(const WalkerEnsemble& ensemble, int i,
                                         const Eigen::VectorXd& z, double log_z_current,
                                         const Eigen::VectorXd& q_to_walkers,
                                         const TargetDensity& target,
                                         const TransitionKernel& kernel) {
  const int n = ensemble.size();
  AcceptanceComputation out;
  out.log_pi_z = target.log_unnorm(z);

  // Installing a point of zero density would leave an invalid ensemble.
  if (out.log_pi_z == kNegInf) {
    out.acceptance = 0.0;
    return out;
  }

  const Eigen::MatrixXd& x = ensemble.walkers();
  const Eigen::VectorXd& sums = ensemble.cached_kernel_sums();
  const Eigen::VectorXd& log_pi = ensemble.cached_log_pi();

  // Identity replacement: x' == x, so the ratio is 1 by definition.
  if (same_point(z, x.col(i))) {
    out.acceptance = 1.0;
    out.identity_move = true;
    out.primed_kernel_sums = sums;
    return out;
  }

  // Kernel sums of the proposed ensemble x' (slot i replaced by z):
  //   l != i: shift by q(x_l|z) - q(x_l|x_i);  l == i: fresh sum from z.
  Eigen::VectorXd primed = sums;
  Eigen::VectorXd q_from_old(n);  // q(x_l | x_i), also the z-slot terms of Z(x', x_i)
  primed[i] = 0.0;
  for (int l = 0; l < n; ++l) {
    if (l == i) continue;
    q_from_old[l] = std::exp(kernel.log_density(x.col(l), x.col(i)));
    const double q_from_new = q_to_walkers[l];
    primed[l] = std::max(0.0, primed[l] + (q_from_new - q_from_old[l]));
    primed[i] += std::exp(kernel.log_density(z, x.col(l)));
  }
  q_from_old[i] = std::exp(kernel.log_density(z, x.col(i)));

  Eigen::VectorXd s_primed(n);
  for (int l = 0; l < n; ++l) {
    const double lp = (l == i) ? out.log_pi_z : log_pi[l];
    s_primed[l] = std::log(q_from_old[l] + primed[l]) - lp;
  }
  const double log_z_primed = detail::log_sum_exp(s_primed);

  if (!std::isfinite(log_z_current) || !std::isfinite(log_z_primed))
    throw NonFiniteRatio("acceptance_probability: Z zero or non-finite");

  out.acceptance = std::min(1.0, std::exp(log_z_current - log_z_primed));
  out.primed_kernel_sums = std::move(primed);
  return out;
}

}  // namespace

namespace detail {

double log_sum_exp(const Eigen::VectorXd& s) {
  const double m = s.maxCoeff();
  if (m == kNegInf) return kNegInf;
  if (std::isnan(m)) return m;
  double acc = 0.0;
  for (Eigen::Index l = 0; l < s.size(); ++l) acc += std::exp(s[l] - m);
  return m + std::log(acc);
}

int categorical_draw(const Eigen::VectorXd& weights, double u) {
  double cum = 0.0;
  const int n = static_cast<int>(weights.size());
  for (int l = 0; l < n; ++l) {
    cum += weights[l];
    if (u < cum) return l;
  }
  return n - 1;
}

}  // namespace detail

std::pair<int, Eigen::VectorXd> propose_clone(const WalkerEnsemble& ensemble,
                                              const TransitionKernel& kernel,
                                              RandomSource& rng) {
  const int j = rng.uniform_int(ensemble.size());
  return {j, kernel.sample(ensemble.walker(j), rng)};
}

WeightComputation importance_weights(const WalkerEnsemble& ensemble, const Eigen::VectorXd& z,
                                     const TargetDensity& target,
                                     const TransitionKernel& kernel) {
  (void)target;
  const int n = ensemble.size();
  const Eigen::MatrixXd& x = ensemble.walkers();
  const Eigen::VectorXd& log_pi = ensemble.cached_log_pi();
  if (!log_pi.allFinite())
    throw std::invalid_argument("importance_weights: cached log pi must be finite");

  WeightComputation w;
  w.log_numerators.resize(n);
  w.q_to_walkers.resize(n);
  for (int l = 0; l < n; ++l) {
    w.q_to_walkers[l] = std::exp(kernel.log_density(x.col(l), z));
    const double total = w.q_to_walkers[l] + ensemble.cached_kernel_sums()[l];
    w.log_numerators[l] = std::log(total) - log_pi[l];
    if (std::isnan(w.log_numerators[l]) ||
        w.log_numerators[l] == std::numeric_limits<double>::infinity())
      throw NonFiniteWeight("importance_weights: non-finite numerator");
  }

  const double m = w.log_numerators.maxCoeff();
  if (m == kNegInf) throw NonFiniteWeight("importance_weights: all numerators vanish");
  Eigen::VectorXd e(n);
  for (int l = 0; l < n; ++l) e[l] = std::exp(w.log_numerators[l] - m);
  const double total_e = e.sum();
  w.weights = e / total_e;
  w.log_z = m + std::log(total_e);
  return w;
}

double acceptance_probability(const WalkerEnsemble& ensemble, int deletion_index,
                              const Eigen::VectorXd& z, const TargetDensity& target,
                              const TransitionKernel& kernel) {
  if (deletion_index < 0 || deletion_index >= ensemble.size())
    throw std::invalid_argument("acceptance_probability: deletion index out of range");
  const WeightComputation w = importance_weights(ensemble, z, target, kernel);
  return compute_acceptance(ensemble, deletion_index, z, w.log_z, w.q_to_walkers, target, kernel)
      .acceptance;
}

StepOutcome ensemble_step(WalkerEnsemble& ensemble, const TargetDensity& target,
                          const TransitionKernel& kernel, RandomSource& rng,
                          const SamplerOptions& options) {
  if (options.cache_rebuild_interval > 0 && ensemble.generation() > 0 &&
      ensemble.generation() % options.cache_rebuild_interval == 0)
    ensemble.recompute_caches(target, kernel);

  StepOutcome outcome;
  auto [j, z] = propose_clone(ensemble, kernel, rng);
  outcome.clone_index = j;
  outcome.proposed_point = z;

  const double log_pi_z = target.log_unnorm(z);
  if (log_pi_z == kNegInf) {
    outcome.deletion_index = j;
    outcome.out_of_support = true;
    ensemble.bump_generation();
    return outcome;
  }

  const WeightComputation w = importance_weights(ensemble, z, target, kernel);
  const int i = detail::categorical_draw(w.weights, rng.uniform());
  outcome.deletion_index = i;
  outcome.teleported = (i != j);

  AcceptanceComputation acc =
      compute_acceptance(ensemble, i, z, w.log_z, w.q_to_walkers, target, kernel);
  outcome.acceptance_probability = acc.acceptance;

  if (rng.uniform() < acc.acceptance) {
    outcome.accepted = true;
    if (!acc.identity_move)
      ensemble.replace_walker(i, z, acc.log_pi_z, std::move(acc.primed_kernel_sums));
  }
  ensemble.bump_generation();
  return outcome;
}

double full_mh_ratio_oracle(const WalkerEnsemble& ensemble, const WalkerEnsemble& proposed,
                            const TargetDensity& target, const TransitionKernel& kernel,
                            int replaced_index) {
  const int n = ensemble.size();
  if (proposed.size() != n)
    throw DiffersOnMultipleIndices("full_mh_ratio_oracle: ensemble sizes differ");

  int diff_count = 0;
  int i = -1;
  for (int k = 0; k < n; ++k) {
    if (!same_point(ensemble.walkers().col(k), proposed.walkers().col(k))) {
      ++diff_count;
      i = k;
    }
  }
  if (diff_count > 1)
    throw DiffersOnMultipleIndices("full_mh_ratio_oracle: ensembles differ on several indices");
  if (diff_count == 0) {
    if (replaced_index < 0 || replaced_index >= n)
      throw DiffersOnMultipleIndices(
          "full_mh_ratio_oracle: ensembles are equal; pass a valid replaced_index");
    i = replaced_index;
  }

  // Direct double-loop evaluation of the displayed formulas; shares only the
  // density primitives with the sampler path, never its caches.
  const auto log_weight = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& point,
                              int index) {
    Eigen::VectorXd s(n);
    for (int l = 0; l < n; ++l) {
      double total = std::exp(kernel.log_density(x.col(l), point));
      for (int k = 0; k < n; ++k) {
        if (k == l) continue;
        total += std::exp(kernel.log_density(x.col(l), x.col(k)));
      }
      s[l] = std::log(total) - target.log_unnorm(x.col(l));
    }
    return s[index] - detail::log_sum_exp(s);
  };
  const auto log_mixture = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& point) {
    Eigen::VectorXd s(n);
    for (int k = 0; k < n; ++k) s[k] = kernel.log_density(point, x.col(k));
    return detail::log_sum_exp(s) - std::log(static_cast<double>(n));
  };
  const auto log_product_density = [&](const Eigen::MatrixXd& x) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += target.log_unnorm(x.col(k));
    return acc;
  };

  const Eigen::MatrixXd& x = ensemble.walkers();
  const Eigen::MatrixXd& xp = proposed.walkers();
  const Eigen::VectorXd z = xp.col(i);
  const Eigen::VectorXd old_point = x.col(i);

  const double log_forward = log_weight(x, z, i) + log_mixture(x, z);
  const double log_backward = log_weight(xp, old_point, i) + log_mixture(xp, old_point);
  const double log_ratio =
      (log_product_density(xp) + log_backward) - (log_product_density(x) + log_forward);
  return std::exp(log_ratio);
}

}  // namespace telemc
