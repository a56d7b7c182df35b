#include "telemc/finite.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "telemc/ensemble.hpp"
#include "telemc/errors.hpp"
#include "telemc/sampler.hpp"
#include "telemc/target.hpp"

namespace telemc {

FiniteInstance make_finite_instance(Eigen::VectorXd pi, Eigen::MatrixXd q) {
  const int s = static_cast<int>(pi.size());
  if (s < 1) throw std::invalid_argument("FiniteInstance: empty state space");
  if (q.rows() != s || q.cols() != s)
    throw std::invalid_argument("FiniteInstance: kernel shape mismatch");
  if (!(pi.array() > 0.0).all())
    throw std::invalid_argument("FiniteInstance: pi must be strictly positive");
  if (!(q.array() > 0.0).all())
    throw std::invalid_argument("FiniteInstance: kernel must be strictly positive");
  pi /= pi.sum();
  for (int c = 0; c < s; ++c) {
    if (std::abs(q.col(c).sum() - 1.0) > 1e-10)
      throw std::invalid_argument("FiniteInstance: kernel column does not sum to 1");
  }
  return {std::move(pi), std::move(q)};
}

FiniteInstance random_finite_instance(int states, RandomSource& rng, double min_entry) {
  Eigen::VectorXd pi(states);
  for (int s = 0; s < states; ++s) pi[s] = min_entry + (1.0 - min_entry) * rng.uniform();
  pi /= pi.sum();
  Eigen::MatrixXd q(states, states);
  for (int c = 0; c < states; ++c) {
    for (int r = 0; r < states; ++r) q(r, c) = min_entry + (1.0 - min_entry) * rng.uniform();
    q.col(c) /= q.col(c).sum();
  }
  return {std::move(pi), std::move(q)};
}

FiniteInstance metropolize_instance(const FiniteInstance& instance) {
  const int s = instance.size();
  const Eigen::MatrixXd& q = instance.q;
  const Eigen::VectorXd& pi = instance.pi;
  Eigen::MatrixXd out(s, s);
  for (int h = 0; h < s; ++h) {
    double rejected = 0.0;
    for (int g = 0; g < s; ++g) {
      if (g == h) continue;
      const double ratio = (pi[g] * q(h, g)) / (pi[h] * q(g, h));
      const double moved = ratio < 1.0 ? q(g, h) * ratio : q(g, h);
      out(g, h) = moved;
      rejected += q(g, h) - moved;
    }
    out(h, h) = q(h, h) + rejected;
  }
  return {pi, std::move(out)};
}

Eigen::VectorXd random_density(int states, RandomSource& rng, double min_entry) {
  Eigen::VectorXd rho(states);
  for (int s = 0; s < states; ++s) rho[s] = min_entry + (1.0 - min_entry) * rng.uniform();
  rho /= rho.sum();
  return rho;
}

namespace {

long ipow(long base, int exp) {
  long out = 1;
  for (int k = 0; k < exp; ++k) out *= base;
  return out;
}

Eigen::MatrixXd decode_ensemble(long index, int S, int N) {
  Eigen::MatrixXd walkers(1, N);
  for (int i = 0; i < N; ++i) {
    walkers(0, i) = static_cast<double>(index % S);
    index /= S;
  }
  return walkers;
}

}  // namespace

Eigen::VectorXd ensemble_product_distribution(const FiniteInstance& instance, int N) {
  const int S = instance.size();
  const long total = ipow(S, N);
  Eigen::VectorXd Pi(total);
  for (long e = 0; e < total; ++e) {
    long rest = e;
    double p = 1.0;
    for (int i = 0; i < N; ++i) {
      p *= instance.pi[rest % S];
      rest /= S;
    }
    Pi[e] = p;
  }
  return Pi;
}

Eigen::MatrixXd exact_ensemble_transition_matrix(const FiniteInstance& instance, int N) {
  const int S = instance.size();
  const long total = ipow(S, N);
  if (total > 10000) throw TooLarge("exact_ensemble_transition_matrix: S^N exceeds 10^4");

  const TabulatedTarget target(instance.pi);
  const TabulatedKernel kernel(instance.q);
  const double clone_prob = 1.0 / N;

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(total, total);
  for (long from = 0; from < total; ++from) {
    WalkerEnsemble ensemble(decode_ensemble(from, S, N), target, kernel);
    for (int j = 0; j < N; ++j) {
      const int xj = static_cast<int>(ensemble.walkers()(0, j));
      for (int zs = 0; zs < S; ++zs) {
        const double propose_prob = clone_prob * instance.q(zs, xj);
        const Eigen::VectorXd z = TabulatedTarget::state_vector(zs);
        const WeightComputation w = importance_weights(ensemble, z, target, kernel);
        for (int i = 0; i < N; ++i) {
          const double path_prob = propose_prob * w.weights[i];
          if (path_prob == 0.0) continue;
          const double accept = acceptance_probability(ensemble, i, z, target, kernel);
          const long to = from + (zs - static_cast<long>(ensemble.walkers()(0, i))) * ipow(S, i);
          P(to, from) += path_prob * accept;
          P(from, from) += path_prob * (1.0 - accept);
        }
      }
    }
  }
  return P;
}

JacobianMatrix jacobian(const FiniteInstance& instance) {
  const int S = instance.size();
  const Eigen::VectorXd q_pi = instance.q * instance.pi;
  const Eigen::VectorXd ratio = q_pi.array() / instance.pi.array();

  Eigen::MatrixXd J = q_pi * ratio.transpose();
  J -= ratio.asDiagonal();
  J += q_pi * Eigen::RowVectorXd::Ones(S);

  // The (Q pi) 1^T term must annihilate the zero-sum subspace: J maps the
  // constraint basis into zero-column-sum vectors.
  const Eigen::MatrixXd basis = constraint_basis(Eigen::VectorXd::Ones(S).normalized());
  const Eigen::MatrixXd mapped = J * basis;
  for (Eigen::Index c = 0; c < mapped.cols(); ++c) {
    if (std::abs(mapped.col(c).sum()) > 1e-12)
      throw std::logic_error("jacobian: constraint subspace is not preserved");
  }
  return {std::move(J)};
}

Eigen::MatrixXd constraint_basis(const Eigen::VectorXd& u) {
  const int S = static_cast<int>(u.size());
  if (S < 2) throw std::invalid_argument("constraint_basis: need at least 2 states");
  Eigen::VectorXd v = u / u.norm();
  v[0] += v[0] >= 0.0 ? 1.0 : -1.0;
  const Eigen::MatrixXd H =
      Eigen::MatrixXd::Identity(S, S) - (2.0 / v.squaredNorm()) * (v * v.transpose());
  return H.rightCols(S - 1);
}

SpectrumReport jacobian_spectrum_check(const FiniteInstance& instance) {
  const Eigen::VectorXd q_pi = instance.q * instance.pi;
  const Eigen::VectorXd sqrt_pi = instance.pi.array().sqrt();
  const Eigen::VectorXd c = q_pi.array() / sqrt_pi.array();
  const Eigen::VectorXd ratio = q_pi.array() / instance.pi.array();

  // Symmetrized Jacobian on {f : sum f sqrt(pi) = 0}; the dropped (Q pi) 1^T
  // term is exactly annihilated by the basis restriction.
  Eigen::MatrixXd M = c * c.transpose();
  M -= ratio.asDiagonal();

  const Eigen::MatrixXd basis = constraint_basis(sqrt_pi);
  Eigen::MatrixXd restricted = basis.transpose() * M * basis;
  restricted = 0.5 * (restricted + restricted.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(restricted);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("jacobian_spectrum_check: eigensolver failed");

  SpectrumReport report;
  report.eigenvalues = solver.eigenvalues();
  report.max_imag = 0.0;  // similarity to a symmetric matrix is exact

  // Ground the realness claim numerically: D M D^{-1} must reproduce the
  // Jacobian without its rank-one 1^T term.
  const Eigen::MatrixXd J_s =
      (q_pi * ratio.transpose() - Eigen::MatrixXd(ratio.asDiagonal()));
  const Eigen::MatrixXd reconstructed =
      sqrt_pi.asDiagonal() * M * sqrt_pi.cwiseInverse().asDiagonal();
  report.similarity_residual = (reconstructed - J_s).cwiseAbs().maxCoeff();

  const double max_eig = report.eigenvalues.maxCoeff();
  report.alpha = -1.0 / max_eig;
  report.bound = (instance.pi.array() / q_pi.array()).maxCoeff();
  report.pass = report.max_imag < 1e-10 && max_eig < 0.0 &&
                report.alpha <= report.bound + 1e-10;
  return report;
}

VarianceRatioReport variance_ratio_bound_check(const FiniteInstance& instance,
                                               const Eigen::VectorXd& rho) {
  if (!(rho.array() > 0.0).all())
    throw std::invalid_argument("variance_ratio_bound_check: rho must be strictly positive");
  const Eigen::VectorXd f = instance.pi.array() / rho.array();
  const Eigen::VectorXd q_rho = instance.q * rho;

  const double mean_rho = rho.dot(f);
  const double var_rho = (rho.array() * (f.array() - mean_rho).square()).sum();
  const double mean_q = q_rho.dot(f);
  const double var_q = (q_rho.array() * (f.array() - mean_q).square()).sum();

  VarianceRatioReport report;
  report.var_rho = var_rho;
  report.var_q_rho = var_q;
  report.bound = (rho.array() / q_rho.array()).maxCoeff();
  report.degenerate = var_q <= 1e-20;
  if (report.degenerate) {
    report.ratio = std::numeric_limits<double>::quiet_NaN();
    report.pass = var_rho <= 1e-20;
  } else {
    report.ratio = var_rho / var_q;
    report.pass = report.ratio <= report.bound + 1e-12;
  }
  return report;
}

}  // namespace telemc
