#include "telemc/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace telemc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846264338328;
constexpr double kLn2 = 0.69314718055994530941723212146;
}  // namespace

double half_cauchy_log_pdf(double x, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("half_cauchy_log_pdf: scale must be positive");
  if (!(x > 0.0)) return kNegInf;
  const double r = x / scale;
  return std::log(2.0 / (kPi * scale)) - std::log1p(r * r);
}

double student_t_log_pdf(double x, double nu, double scale) {
  if (!(nu > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("student_t_log_pdf: nu and scale must be positive");
  const double r = x / scale;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi) -
         std::log(scale) - 0.5 * (nu + 1.0) * std::log1p(r * r / nu);
}

double standard_normal_log_pdf(double x) {
  return -0.5 * std::log(2.0 * kPi) - 0.5 * x * x;
}

double chi_log_pdf(double x, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("chi_log_pdf: k must be positive");
  if (!(x > 0.0)) return kNegInf;
  return (1.0 - 0.5 * k) * kLn2 - std::lgamma(0.5 * k) + (k - 1.0) * std::log(x) -
         0.5 * x * x;
}

double bartlett_log_prior(const Eigen::MatrixXd& L) {
  const Eigen::Index n = L.rows();
  if (L.cols() != n || n < 1)
    throw std::invalid_argument("bartlett_log_prior: factor must be square");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = L(i, i);
    if (!(c > 0.0)) return kNegInf;
    acc += chi_log_pdf(c, static_cast<double>(n - i));  // k = n - i + 1, 1-based
    for (Eigen::Index j = 0; j < i; ++j) acc += standard_normal_log_pdf(L(i, j));
  }
  return acc;
}

}  // namespace telemc
