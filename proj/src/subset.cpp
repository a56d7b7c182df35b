#include "telemc/subset.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "telemc/errors.hpp"

namespace telemc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool same_point(const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b) {
  return (a.array() == b.array()).all();
}

struct SubsetAcceptance {
  double acceptance = 0.0;
  double log_pi_new = kNegInf;  // log pi(z, v_i)
  Eigen::VectorXd primed_kernel_sums;
  bool identity_move = false;
};

SubsetAcceptance subset_compute_acceptance(const SplitEnsemble& ensemble, int i,
                                           const Eigen::VectorXd& z,
                                           const SubsetWeightComputation& w,
                                           const TargetDensity& target,
                                           const TransitionKernel& u_kernel) {
  const int n = ensemble.size();
  SubsetAcceptance out;
  out.log_pi_new = w.log_pi_z_v[i];
  if (out.log_pi_new == kNegInf) {
    out.acceptance = 0.0;
    return out;
  }

  const Eigen::MatrixXd& u = ensemble.u_walkers();
  const Eigen::VectorXd& sums = ensemble.cached_u_kernel_sums();
  const Eigen::VectorXd& log_pi = ensemble.cached_log_pi();

  if (same_point(z, u.col(i))) {
    out.acceptance = 1.0;
    out.identity_move = true;
    out.primed_kernel_sums = sums;
    return out;
  }

  // pi_{v_l}(u_i_old) = pi(u_i_old, v_l), evaluated in one batch so targets
  // caching on the u-block hyperparameters reuse their factorization.
  Eigen::VectorXd log_pi_old_v(n);
  for (int l = 0; l < n; ++l)
    log_pi_old_v[l] = target.log_unnorm(ensemble.joint_state_with_u(u.col(i), l));

  Eigen::VectorXd primed = sums;
  Eigen::VectorXd q_from_old(n);
  primed[i] = 0.0;
  for (int l = 0; l < n; ++l) {
    if (l == i) continue;
    q_from_old[l] = std::exp(u_kernel.log_density(u.col(l), u.col(i)));
    primed[l] = std::max(0.0, primed[l] + (w.q_to_walkers[l] - q_from_old[l]));
    primed[i] += std::exp(u_kernel.log_density(z, u.col(l)));
  }
  q_from_old[i] = std::exp(u_kernel.log_density(z, u.col(i)));

  Eigen::VectorXd s_primed(n);
  for (int l = 0; l < n; ++l) {
    const double lp = (l == i) ? out.log_pi_new : log_pi[l];
    s_primed[l] = log_pi_old_v[l] + std::log(q_from_old[l] + primed[l]) - lp;
  }
  const double log_z_primed = detail::log_sum_exp(s_primed);
  if (!std::isfinite(w.log_z) || !std::isfinite(log_z_primed))
    throw NonFiniteRatio("subset_acceptance_probability: Z zero or non-finite");

  const double log_ratio = (log_pi[i] - out.log_pi_new) + w.log_z - log_z_primed;
  out.acceptance = std::min(1.0, std::exp(log_ratio));
  out.primed_kernel_sums = std::move(primed);
  return out;
}

}  // namespace

SplitEnsemble::SplitEnsemble(Eigen::MatrixXd u, Eigen::MatrixXd v,
                             const TargetDensity& target, const TransitionKernel& u_kernel)
    : u_(std::move(u)), v_(std::move(v)) {
  if (u_.cols() < 1) throw std::invalid_argument("SplitEnsemble: N must be >= 1");
  if (v_.cols() != u_.cols())
    throw std::invalid_argument("SplitEnsemble: u and v walker counts differ");
  if (u_.rows() + v_.rows() != target.dim())
    throw std::invalid_argument("SplitEnsemble: block dimensions do not match target");
  recompute_caches(target, u_kernel);
}

Eigen::VectorXd SplitEnsemble::joint_state(int i) const {
  Eigen::VectorXd x(u_.rows() + v_.rows());
  x << u_.col(i), v_.col(i);
  return x;
}

Eigen::VectorXd SplitEnsemble::joint_state_with_u(const Eigen::VectorXd& u, int i) const {
  Eigen::VectorXd x(u_.rows() + v_.rows());
  x << u, v_.col(i);
  return x;
}

Eigen::VectorXd SplitEnsemble::joint_state_with_v(int i, const Eigen::VectorXd& v) const {
  Eigen::VectorXd x(u_.rows() + v_.rows());
  x << u_.col(i), v;
  return x;
}

void SplitEnsemble::recompute_caches(const TargetDensity& target,
                                     const TransitionKernel& u_kernel) {
  const int n = size();
  cached_log_pi_.resize(n);
  for (int i = 0; i < n; ++i) cached_log_pi_[i] = target.log_unnorm(joint_state(i));
  u_kernel_sums_ = WalkerEnsemble::direct_kernel_sums(u_, u_kernel);
}

void SplitEnsemble::replace_u_walker(int i, const Eigen::VectorXd& z, double log_pi_z,
                                     Eigen::VectorXd new_kernel_sums) {
  u_.col(i) = z;
  cached_log_pi_[i] = log_pi_z;
  u_kernel_sums_ = std::move(new_kernel_sums);
}

void SplitEnsemble::set_v_walker(int i, const Eigen::VectorXd& v, double log_pi) {
  v_.col(i) = v;
  cached_log_pi_[i] = log_pi;
}

double SplitEnsemble::max_kernel_sum_error(const TransitionKernel& u_kernel) const {
  const Eigen::VectorXd direct = WalkerEnsemble::direct_kernel_sums(u_, u_kernel);
  double worst = 0.0;
  for (int i = 0; i < size(); ++i) {
    const double scale = std::max(std::abs(direct[i]), 1e-300);
    worst = std::max(worst, std::abs(u_kernel_sums_[i] - direct[i]) / scale);
  }
  return worst;
}

SubsetWeightComputation subset_weights(const SplitEnsemble& ensemble, const Eigen::VectorXd& z,
                                       const TargetDensity& target,
                                       const TransitionKernel& u_kernel) {
  const int n = ensemble.size();
  const Eigen::VectorXd& log_pi = ensemble.cached_log_pi();
  if (!log_pi.allFinite())
    throw std::invalid_argument("subset_weights: cached log pi must be finite");

  SubsetWeightComputation w;
  w.log_numerators.resize(n);
  w.q_to_walkers.resize(n);
  w.log_pi_z_v.resize(n);
  for (int l = 0; l < n; ++l)
    w.log_pi_z_v[l] = target.log_unnorm(ensemble.joint_state_with_u(z, l));
  for (int l = 0; l < n; ++l) {
    w.q_to_walkers[l] = std::exp(u_kernel.log_density(ensemble.u_walkers().col(l), z));
    const double total = w.q_to_walkers[l] + ensemble.cached_u_kernel_sums()[l];
    w.log_numerators[l] = w.log_pi_z_v[l] + std::log(total) - log_pi[l];
    if (std::isnan(w.log_numerators[l]) ||
        w.log_numerators[l] == std::numeric_limits<double>::infinity())
      throw NonFiniteWeight("subset_weights: non-finite numerator");
  }

  const double m = w.log_numerators.maxCoeff();
  if (m == kNegInf) throw NonFiniteWeight("subset_weights: all numerators vanish");
  Eigen::VectorXd e(n);
  for (int l = 0; l < n; ++l) e[l] = std::exp(w.log_numerators[l] - m);
  const double total_e = e.sum();
  w.weights = e / total_e;
  w.log_z = m + std::log(total_e);
  return w;
}

double subset_acceptance_probability(const SplitEnsemble& ensemble, int deletion_index,
                                     const Eigen::VectorXd& z, const TargetDensity& target,
                                     const TransitionKernel& u_kernel) {
  if (deletion_index < 0 || deletion_index >= ensemble.size())
    throw std::invalid_argument("subset_acceptance_probability: deletion index out of range");
  const SubsetWeightComputation w = subset_weights(ensemble, z, target, u_kernel);
  return subset_compute_acceptance(ensemble, deletion_index, z, w, target, u_kernel)
      .acceptance;
}

StepOutcome interacting_step(SplitEnsemble& ensemble, const TargetDensity& target,
                             const TransitionKernel& u_kernel, RandomSource& rng,
                             const SamplerOptions& options) {
  if (options.cache_rebuild_interval > 0 && ensemble.generation() > 0 &&
      ensemble.generation() % options.cache_rebuild_interval == 0)
    ensemble.recompute_caches(target, u_kernel);

  StepOutcome outcome;
  const int j = rng.uniform_int(ensemble.size());
  const Eigen::VectorXd z = u_kernel.sample(ensemble.u_walkers().col(j), rng);
  outcome.clone_index = j;
  outcome.proposed_point = z;

  // z outside the support of every conditional zeroes all numerators; treat
  // that as an automatic rejection. Other non-finite weights propagate.
  SubsetWeightComputation w;
  try {
    w = subset_weights(ensemble, z, target, u_kernel);
  } catch (const NonFiniteWeight&) {
    bool any_support = false;
    for (int l = 0; l < ensemble.size(); ++l) {
      if (target.log_unnorm(ensemble.joint_state_with_u(z, l)) != kNegInf) {
        any_support = true;
        break;
      }
    }
    if (any_support) throw;
    outcome.deletion_index = j;
    outcome.out_of_support = true;
    ensemble.bump_generation();
    return outcome;
  }

  const int i = detail::categorical_draw(w.weights, rng.uniform());
  outcome.deletion_index = i;
  outcome.teleported = (i != j);

  SubsetAcceptance acc = subset_compute_acceptance(ensemble, i, z, w, target, u_kernel);
  outcome.acceptance_probability = acc.acceptance;

  if (rng.uniform() < acc.acceptance) {
    outcome.accepted = true;
    if (!acc.identity_move)
      ensemble.replace_u_walker(i, z, acc.log_pi_new, std::move(acc.primed_kernel_sums));
  }
  ensemble.bump_generation();
  return outcome;
}

SweepStats independent_sweep(SplitEnsemble& ensemble, const TargetDensity& target,
                             const TransitionKernel& v_kernel, int n_inner,
                             RandomSource& rng) {
  if (n_inner < 1) throw std::invalid_argument("independent_sweep: n_inner must be >= 1");
  const int n = ensemble.size();
  SweepStats stats;
  stats.acceptances = Eigen::VectorXi::Zero(n);
  stats.proposals_per_walker = n_inner;

  for (int i = 0; i < n; ++i) {
    RandomSource sub(RandomSource::substream_seed(
        rng.seed(), static_cast<std::uint64_t>(ensemble.sweeps_done()),
        static_cast<std::uint64_t>(i)));
    Eigen::VectorXd v_cur = ensemble.v_walkers().col(i);
    double lp_cur = ensemble.cached_log_pi()[i];
    for (int t = 0; t < n_inner; ++t) {
      const Eigen::VectorXd v_prop = v_kernel.sample(v_cur, sub);
      const double lp_prop = target.log_unnorm(ensemble.joint_state_with_v(i, v_prop));
      double log_alpha = lp_prop - lp_cur;
      if (ensemble.v_dim() > 0 && lp_prop != kNegInf)
        log_alpha += v_kernel.log_density(v_cur, v_prop) - v_kernel.log_density(v_prop, v_cur);
      if (log_alpha >= 0.0 || sub.uniform() < std::exp(log_alpha)) {
        v_cur = v_prop;
        lp_cur = lp_prop;
        stats.acceptances[i] += 1;
      }
    }
    ensemble.set_v_walker(i, v_cur, lp_cur);
  }
  ensemble.bump_sweeps();
  return stats;
}

AlternatingOutcome alternating_step(SplitEnsemble& ensemble, const TargetDensity& target,
                                    const TransitionKernel& u_kernel,
                                    const TransitionKernel& v_kernel, int n_inner,
                                    RandomSource& rng, const SamplerOptions& options) {
  AlternatingOutcome out;
  out.interacting = interacting_step(ensemble, target, u_kernel, rng, options);
  out.sweep = independent_sweep(ensemble, target, v_kernel, n_inner, rng);
  return out;
}

}  // namespace telemc
