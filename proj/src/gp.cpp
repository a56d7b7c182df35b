#include "telemc/gp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "telemc/distributions.hpp"
#include "telemc/errors.hpp"

namespace telemc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// -1/2 log|C| - 1/2 y^T C^{-1} y - (m/2) log(2 pi) via Cholesky of C.
// Falls back to the jittered factorization if the plain one fails (possible
// when sigma^2 is below the kernel's numerical rank deficiency).
double gaussian_log_likelihood(Eigen::MatrixXd C, const Eigen::VectorXd& y) {
  const int m = static_cast<int>(y.size());
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  Eigen::MatrixXd L;
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    L = cholesky_jittered(C).L;
  }
  const Eigen::VectorXd alpha = L.triangularView<Eigen::Lower>().solve(y);
  const double log_det_half = L.diagonal().array().log().sum();
  return -log_det_half - 0.5 * alpha.squaredNorm() - 0.5 * m * kLogTwoPi;
}

}  // namespace

Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& inputs, double alpha, double rho) {
  if (!(alpha > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("se_kernel_matrix: alpha and rho must be positive");
  const int m = static_cast<int>(inputs.cols());
  const double a2 = alpha * alpha;
  const double inv_rho2 = 1.0 / (rho * rho);
  Eigen::MatrixXd K(m, m);
  for (int i = 0; i < m; ++i) {
    K(i, i) = a2;
    for (int j = 0; j < i; ++j) {
      const double d2 = (inputs.col(i) - inputs.col(j)).squaredNorm();
      K(i, j) = K(j, i) = a2 * std::exp(-d2 * inv_rho2);
    }
  }
  return K;
}

Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& inputs, double alpha,
                                 const Eigen::MatrixXd& L) {
  if (!(alpha > 0.0)) throw std::invalid_argument("se_kernel_matrix: alpha must be positive");
  if (L.rows() != inputs.rows() || L.cols() != inputs.rows())
    throw std::invalid_argument("se_kernel_matrix: metric factor shape mismatch");
  const int m = static_cast<int>(inputs.cols());
  const double a2 = alpha * alpha;
  Eigen::MatrixXd K(m, m);
  for (int i = 0; i < m; ++i) {
    K(i, i) = a2;
    for (int j = 0; j < i; ++j) {
      const Eigen::VectorXd w = L.transpose() * (inputs.col(i) - inputs.col(j));
      K(i, j) = K(j, i) = a2 * std::exp(-w.squaredNorm());
    }
  }
  return K;
}

CholeskyFactor cholesky_jittered(const Eigen::MatrixXd& A, double base_jitter) {
  if (A.rows() != A.cols()) throw std::invalid_argument("cholesky_jittered: matrix not square");
  const double scale = A.diagonal().mean();
  double jitter = base_jitter;
  while (true) {
    Eigen::MatrixXd B = A;
    B.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if ((L.diagonal().array() > 0.0).all()) return {std::move(L), jitter * scale};
    }
    if (jitter >= 1e-6)
      throw NotFactorizable("cholesky_jittered: factorization failed at maximum jitter");
    jitter *= 10.0;
  }
}

double gp_gaussian_logpost(double alpha, double rho, double sigma, const GPDataset& data,
                           double prior_scale) {
  if (!(alpha > 0.0) || !(rho > 0.0) || !(sigma > 0.0)) return kNegInf;
  Eigen::MatrixXd C = se_kernel_matrix(data.inputs, alpha, rho);
  C.diagonal().array() += sigma * sigma;
  return gaussian_log_likelihood(std::move(C), data.y) +
         half_cauchy_log_pdf(alpha, prior_scale) + half_cauchy_log_pdf(rho, prior_scale) +
         half_cauchy_log_pdf(sigma, prior_scale);
}

double gp_gaussian_logpost(double alpha, const Eigen::MatrixXd& L, double sigma,
                           const GPDataset& data, double prior_scale) {
  if (!(alpha > 0.0) || !(sigma > 0.0)) return kNegInf;
  if (!(L.diagonal().array() > 0.0).all()) return kNegInf;
  Eigen::MatrixXd C = se_kernel_matrix(data.inputs, alpha, L);
  C.diagonal().array() += sigma * sigma;
  return gaussian_log_likelihood(std::move(C), data.y) +
         half_cauchy_log_pdf(alpha, prior_scale) + half_cauchy_log_pdf(sigma, prior_scale) +
         bartlett_log_prior(L);
}

double gp_nongaussian_logpost(double alpha, double rho, double sigma,
                              const Eigen::VectorXd& w, const GPDataset& data, double nu,
                              double prior_scale) {
  if (!(alpha > 0.0) || !(rho > 0.0) || !(sigma > 0.0)) return kNegInf;
  const Eigen::MatrixXd L = cholesky_jittered(se_kernel_matrix(data.inputs, alpha, rho)).L;
  const Eigen::VectorXd eps = data.y + L * w;
  double acc = -0.5 * w.squaredNorm() + half_cauchy_log_pdf(alpha, prior_scale) +
               half_cauchy_log_pdf(rho, prior_scale) + half_cauchy_log_pdf(sigma, prior_scale);
  for (Eigen::Index i = 0; i < eps.size(); ++i)
    acc += student_t_log_pdf(eps[i], nu, sigma);
  return acc;
}

Eigen::VectorXd gp_nongaussian_grad_w(double alpha, double rho, double sigma,
                                      const Eigen::VectorXd& w, const GPDataset& data,
                                      double nu) {
  if (!(alpha > 0.0) || !(rho > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("gp_nongaussian_grad_w: theta out of support");
  const Eigen::MatrixXd L = cholesky_jittered(se_kernel_matrix(data.inputs, alpha, rho)).L;
  const Eigen::VectorXd eps = data.y + L * w;
  Eigen::VectorXd g(eps.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i)
    g[i] = -(nu + 1.0) * eps[i] / (nu * sigma * sigma + eps[i] * eps[i]);
  return -w + L.transpose() * g;
}

Eigen::MatrixXd unpack_lower_triangular(const Eigen::VectorXd& entries, int n) {
  if (entries.size() != n * (n + 1) / 2)
    throw std::invalid_argument("unpack_lower_triangular: wrong entry count");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) L(i, j) = entries[k++];
  return L;
}

Eigen::VectorXd pack_lower_triangular(const Eigen::MatrixXd& L) {
  const int n = static_cast<int>(L.rows());
  Eigen::VectorXd entries(n * (n + 1) / 2);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) entries[k++] = L(i, j);
  return entries;
}

GPMultivariateTarget::GPMultivariateTarget(GPDataset data, double prior_scale)
    : data_(std::move(data)), prior_scale_(prior_scale), n_(data_.dim()) {}

double GPMultivariateTarget::log_unnorm(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd L = unpack_lower_triangular(x.segment(1, n_ * (n_ + 1) / 2), n_);
  return gp_gaussian_logpost(x[0], L, x[x.size() - 1], data_, prior_scale_);
}

const Eigen::MatrixXd& GPNonGaussianTarget::kernel_factor(double alpha, double rho) const {
  if (alpha != cached_alpha_ || rho != cached_rho_) {
    cached_factor_ = cholesky_jittered(se_kernel_matrix(data_.inputs, alpha, rho)).L;
    cached_alpha_ = alpha;
    cached_rho_ = rho;
  }
  return cached_factor_;
}

double GPNonGaussianTarget::log_unnorm(const Eigen::VectorXd& x) const {
  const double alpha = x[0];
  const double rho = x[1];
  const double sigma = x[2];
  if (!(alpha > 0.0) || !(rho > 0.0) || !(sigma > 0.0)) return kNegInf;
  const Eigen::VectorXd w = x.tail(data_.count());
  const Eigen::VectorXd eps = data_.y + kernel_factor(alpha, rho) * w;
  double acc = -0.5 * w.squaredNorm() + half_cauchy_log_pdf(alpha, prior_scale_) +
               half_cauchy_log_pdf(rho, prior_scale_) +
               half_cauchy_log_pdf(sigma, prior_scale_);
  for (Eigen::Index i = 0; i < eps.size(); ++i)
    acc += student_t_log_pdf(eps[i], nu_, sigma);
  return acc;
}

}  // namespace telemc
