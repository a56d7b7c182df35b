#ifndef TELEMC_FINITE_HPP
#define TELEMC_FINITE_HPP

#include <Eigen/Dense>

#include "telemc/random.hpp"

namespace telemc {

// Finite target/proposal pair: pi strictly positive summing to 1 and a
// column-stochastic kernel with all entries strictly positive, so that
// supp(pi) = supp(Q rho) = X for every density rho.
struct FiniteInstance {
  Eigen::VectorXd pi;  // S
  Eigen::MatrixXd q;   // S x S, q(y|x) = q(y, x), columns sum to 1

  int size() const { return static_cast<int>(pi.size()); }
};

FiniteInstance make_finite_instance(Eigen::VectorXd pi, Eigen::MatrixXd q);

// Uniformly drawn entries in [min_entry, 1), normalized.
FiniteInstance random_finite_instance(int states, RandomSource& rng, double min_entry = 0.05);

// Metropolis correction of the kernel, preserving strict positivity.
FiniteInstance metropolize_instance(const FiniteInstance& instance);

// Random strictly positive density on the instance's state space.
Eigen::VectorXd random_density(int states, RandomSource& rng, double min_entry = 0.05);

// Product distribution Pi over S^N ensemble states; walker 0 is the least
// significant digit of the ensemble index.
Eigen::VectorXd ensemble_product_distribution(const FiniteInstance& instance, int N);

// Exact one-step transition matrix of the N-walker teleporting ensemble chain,
// built by exhausting (clone index, proposal, deletion index, accept) using
// the sampler's own weight and acceptance computations. Columns sum to 1.
// Throws TooLarge when S^N exceeds 10^4.
Eigen::MatrixXd exact_ensemble_transition_matrix(const FiniteInstance& instance, int N);

// Linearization of the mean-field dynamics at rho = pi, full S x S form
// including the (Q pi) 1^T term that vanishes on the zero-sum subspace:
//   J = (Q pi) (Q pi / pi)^T - diag(Q pi / pi) + (Q pi) 1^T.
struct JacobianMatrix {
  Eigen::MatrixXd J;
};

JacobianMatrix jacobian(const FiniteInstance& instance);

// Orthonormal basis (S x (S-1)) of the hyperplane {f : u^T f = 0}, taken from
// the trailing columns of the Householder reflector sending e_1 to +-u.
Eigen::MatrixXd constraint_basis(const Eigen::VectorXd& u);

// Spectrum of the Jacobian on the constraint subspace, computed from the
// symmetrized form M = D^{-1} J D with D = diag(sqrt(pi)). Passes when all
// eigenvalues are strictly negative and alpha = -1/max(eig) respects the
// bound max(pi / Q pi).
struct SpectrumReport {
  Eigen::VectorXd eigenvalues;  // ascending, on the constraint subspace
  double max_imag;              // structurally zero for the symmetrized solve
  double alpha;
  double bound;
  double similarity_residual;  // max |D M D^{-1} - J_restricted-form|
  bool pass;
};

SpectrumReport jacobian_spectrum_check(const FiniteInstance& instance);

// Checks Var_rho(pi/rho) / Var_{Q rho}(pi/rho) <= max(rho / Q rho).
// Both variances vanish exactly at rho = pi; that case is flagged degenerate
// and passes.
struct VarianceRatioReport {
  double var_rho;
  double var_q_rho;
  double ratio;  // NaN when degenerate
  double bound;
  bool degenerate;
  bool pass;
};

VarianceRatioReport variance_ratio_bound_check(const FiniteInstance& instance,
                                               const Eigen::VectorXd& rho);

}  // namespace telemc

#endif
