#ifndef TELEMC_DISTRIBUTIONS_HPP
#define TELEMC_DISTRIBUTIONS_HPP

#include <Eigen/Dense>

namespace telemc {

// Exact log-densities, normalization constants included, so that quadrature
// of the exponentiated values recovers 1. Out-of-support arguments give -inf.

// Cauchy truncated to x > 0: log(2 / (pi s)) - log(1 + (x/s)^2).
double half_cauchy_log_pdf(double x, double scale);

// Student-t with nu degrees of freedom and scale s.
double student_t_log_pdf(double x, double nu, double scale);

double standard_normal_log_pdf(double x);

// Chi distribution with k degrees of freedom:
// (1 - k/2) ln 2 - ln Gamma(k/2) + (k-1) ln x - x^2 / 2.
double chi_log_pdf(double x, double k);

// Bartlett prior for a lower-triangular factor L of order n: standard normal
// strict-lower entries and chi(n - i + 1) diagonal entries (1-based row i),
// so that L L^T ~ Wishart(I_n, n). Non-positive diagonal gives -inf.
double bartlett_log_prior(const Eigen::MatrixXd& L);

}  // namespace telemc

#endif
