#ifndef TELEMC_GP_HPP
#define TELEMC_GP_HPP

#include <Eigen/Dense>

#include "telemc/gp_data.hpp"
#include "telemc/target.hpp"

namespace telemc {

// Squared-exponential kernel matrix, scalar length-scale:
//   K_ij = alpha^2 exp(-|x_i - x_j|^2 / rho^2).
Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& inputs, double alpha, double rho);

// Matrix-metric variant, K_ij = alpha^2 exp(-(x_i-x_j)^T L L^T (x_i-x_j))
// with L lower triangular.
Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& inputs, double alpha,
                                 const Eigen::MatrixXd& L);

struct CholeskyFactor {
  Eigen::MatrixXd L;   // lower triangular, diag > 0
  double jitter_used;  // absolute diagonal increment that succeeded
};

// Factors A + jitter * mean(diag A) * I, escalating jitter from base_jitter by
// factors of 10 up to 1e-6. Throws NotFactorizable when the final level fails.
CholeskyFactor cholesky_jittered(const Eigen::MatrixXd& A, double base_jitter = 1e-10);

// Gaussian-noise log posterior, univariate kernel hyperparameters
// theta = (alpha, rho, sigma) with independent half-Cauchy(0, prior_scale)
// priors:
//   -1/2 log|K + sigma^2 I| - 1/2 y^T (K + sigma^2 I)^{-1} y
//   - (m/2) log(2 pi) + log p(theta).
// Out-of-support theta gives -inf.
double gp_gaussian_logpost(double alpha, double rho, double sigma, const GPDataset& data,
                           double prior_scale = 3.0);

// Multivariate variant with a Bartlett-decomposed metric factor L; half-Cauchy
// priors on alpha and sigma, Bartlett prior on L.
double gp_gaussian_logpost(double alpha, const Eigen::MatrixXd& L, double sigma,
                           const GPDataset& data, double prior_scale = 3.0);

// Whitened non-Gaussian noise model: with eps = y + chol(K_theta) w,
//   -1/2 |w|^2 + log p(theta) + sum_i log t_nu(eps_i; scale sigma).
double gp_nongaussian_logpost(double alpha, double rho, double sigma,
                              const Eigen::VectorXd& w, const GPDataset& data,
                              double nu = 2.0, double prior_scale = 3.0);

// Analytic gradient of gp_nongaussian_logpost with respect to w:
//   -w + L^T g,  g_i = -(nu + 1) eps_i / (nu sigma^2 + eps_i^2).
Eigen::VectorXd gp_nongaussian_grad_w(double alpha, double rho, double sigma,
                                      const Eigen::VectorXd& w, const GPDataset& data,
                                      double nu = 2.0);

// Row-major packing of the lower triangle (diagonal included):
// (L00, L10, L11, L20, L21, L22, ...).
Eigen::MatrixXd unpack_lower_triangular(const Eigen::VectorXd& entries, int n);
Eigen::VectorXd pack_lower_triangular(const Eigen::MatrixXd& L);

// State (alpha, rho, sigma).
class GPUnivariateTarget : public TargetDensity {
 public:
  explicit GPUnivariateTarget(GPDataset data, double prior_scale = 3.0)
      : data_(std::move(data)), prior_scale_(prior_scale) {}

  int dim() const override { return 3; }
  double log_unnorm(const Eigen::VectorXd& x) const override {
    return gp_gaussian_logpost(x[0], x[1], x[2], data_, prior_scale_);
  }

  const GPDataset& data() const { return data_; }

 private:
  GPDataset data_;
  double prior_scale_;
};

// State (alpha, packed lower triangle, sigma).
class GPMultivariateTarget : public TargetDensity {
 public:
  explicit GPMultivariateTarget(GPDataset data, double prior_scale = 3.0);

  int dim() const override { return 2 + n_ * (n_ + 1) / 2; }
  double log_unnorm(const Eigen::VectorXd& x) const override;

  int input_dim() const { return n_; }
  const GPDataset& data() const { return data_; }

 private:
  GPDataset data_;
  double prior_scale_;
  int n_;
};

// State (alpha, rho, sigma, w_1, ..., w_m). Keeps a one-entry factorization
// cache keyed on (alpha, rho); evaluations from a single chain are sequential,
// so the cache is not synchronized -- concurrent chains use separate instances.
class GPNonGaussianTarget : public TargetDensity {
 public:
  explicit GPNonGaussianTarget(GPDataset data, double nu = 2.0, double prior_scale = 3.0)
      : data_(std::move(data)), nu_(nu), prior_scale_(prior_scale) {}

  int dim() const override { return 3 + data_.count(); }
  double log_unnorm(const Eigen::VectorXd& x) const override;

  // Factor of K_(alpha, rho), cached on repeated hyperparameters.
  const Eigen::MatrixXd& kernel_factor(double alpha, double rho) const;

  double nu() const { return nu_; }
  const GPDataset& data() const { return data_; }

 private:
  GPDataset data_;
  double nu_;
  double prior_scale_;
  mutable double cached_alpha_ = -1.0;
  mutable double cached_rho_ = -1.0;
  mutable Eigen::MatrixXd cached_factor_;
};

}  // namespace telemc

#endif
