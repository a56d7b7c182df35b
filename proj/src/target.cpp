#include "telemc/target.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace telemc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

// A zero-dimensional kernel is allowed: it backs the degenerate v-block
// split where the second state factor is a single point.
GaussianKernel::GaussianKernel(Eigen::VectorXd variances) : var_(std::move(variances)) {
  if ((var_.array() < 0.0).any())
    throw std::invalid_argument("GaussianKernel: negative variance");
  std_ = var_.array().sqrt();
  log_norm_ = 0.0;
  for (Eigen::Index j = 0; j < var_.size(); ++j) {
    // Zero-variance components only support sampling; see log_density.
    log_norm_ -= var_[j] > 0.0 ? 0.5 * std::log(kTwoPi * var_[j]) : 0.0;
  }
}

GaussianKernel::GaussianKernel(int dim, double variance)
    : GaussianKernel(Eigen::VectorXd::Constant(dim, variance)) {}

double GaussianKernel::log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  if ((var_.array() <= 0.0).any())
    throw std::invalid_argument("GaussianKernel: density undefined at zero variance");
  const Eigen::ArrayXd d = (y - x).array();
  return log_norm_ - 0.5 * (d * d / var_.array()).sum();
}

Eigen::VectorXd GaussianKernel::sample(const Eigen::VectorXd& x, RandomSource& rng) const {
  Eigen::VectorXd z(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) z[j] = x[j] + std_[j] * rng.normal();
  return z;
}

TabulatedTarget::TabulatedTarget(const Eigen::VectorXd& pi) : pi_(pi) {
  if (pi_.size() < 1) throw std::invalid_argument("TabulatedTarget: empty table");
  if ((pi_.array() < 0.0).any())
    throw std::invalid_argument("TabulatedTarget: negative probability");
  // Scalar log keeps equal entries bit-identical; Eigen's vectorized log can
  // round packet lanes and the remainder differently.
  log_pi_.resize(pi_.size());
  for (Eigen::Index s = 0; s < pi_.size(); ++s)
    log_pi_[s] = std::log(pi_[s]);  // zero entries map to -inf
}

int TabulatedTarget::state_index(const Eigen::VectorXd& x) {
  return static_cast<int>(std::lround(x[0]));
}

Eigen::VectorXd TabulatedTarget::state_vector(int s) {
  Eigen::VectorXd x(1);
  x[0] = static_cast<double>(s);
  return x;
}

double TabulatedTarget::log_unnorm(const Eigen::VectorXd& x) const {
  const int s = state_index(x);
  if (s < 0 || s >= states()) return kNegInf;
  return log_pi_[s];
}

TabulatedKernel::TabulatedKernel(const Eigen::MatrixXd& q) : q_(q) {
  if (q_.rows() != q_.cols() || q_.rows() < 1)
    throw std::invalid_argument("TabulatedKernel: matrix must be square");
  if ((q_.array() < 0.0).any())
    throw std::invalid_argument("TabulatedKernel: negative entry");
  for (Eigen::Index c = 0; c < q_.cols(); ++c) {
    if (std::abs(q_.col(c).sum() - 1.0) > 1e-10)
      throw std::invalid_argument("TabulatedKernel: column does not sum to 1");
  }
  log_q_.resize(q_.rows(), q_.cols());
  for (Eigen::Index c = 0; c < q_.cols(); ++c)
    for (Eigen::Index r = 0; r < q_.rows(); ++r) log_q_(r, c) = std::log(q_(r, c));
}

double TabulatedKernel::log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const {
  const int sy = TabulatedTarget::state_index(y);
  const int sx = TabulatedTarget::state_index(x);
  if (sy < 0 || sy >= states() || sx < 0 || sx >= states()) return kNegInf;
  return log_q_(sy, sx);
}

Eigen::VectorXd TabulatedKernel::sample(const Eigen::VectorXd& x, RandomSource& rng) const {
  const int sx = TabulatedTarget::state_index(x);
  const double u = rng.uniform();
  double cum = 0.0;
  for (int s = 0; s < states(); ++s) {
    cum += q_(s, sx);
    if (u < cum) return TabulatedTarget::state_vector(s);
  }
  return TabulatedTarget::state_vector(states() - 1);
}

DoubleWellTarget::DoubleWellTarget(double beta) : beta_(beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("DoubleWellTarget: beta must be positive");
}

}  // namespace telemc
