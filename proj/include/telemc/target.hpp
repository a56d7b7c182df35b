#ifndef TELEMC_TARGET_HPP
#define TELEMC_TARGET_HPP

#include <Eigen/Dense>

#include "telemc/random.hpp"

namespace telemc {

// Unnormalized log-density on a state space of fixed-length real vectors.
// Finite state spaces are represented by integer-coded states: a length-1
// vector holding the state index, with tabulated values. Out-of-support
// states return -inf, never throw.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;
  virtual int dim() const = 0;
  virtual double log_unnorm(const Eigen::VectorXd& x) const = 0;
};

// Samplable proposal with evaluable transition density q(y|x).
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;
  virtual int dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd sample(const Eigen::VectorXd& x, RandomSource& rng) const = 0;
};

// Symmetric Gaussian random-walk kernel with diagonal covariance.
// A zero variance component is the degenerate width limit: sampling returns
// the mean exactly; evaluating the density there is a precondition violation.
class GaussianKernel : public TransitionKernel {
 public:
  explicit GaussianKernel(Eigen::VectorXd variances);
  // Isotropic N(x, variance * I) in `dim` dimensions.
  GaussianKernel(int dim, double variance);

  int dim() const override { return static_cast<int>(var_.size()); }
  double log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& x, RandomSource& rng) const override;

  const Eigen::VectorXd& variances() const { return var_; }

 private:
  Eigen::VectorXd var_;
  Eigen::VectorXd std_;
  double log_norm_;  // -1/2 sum log(2 pi var_j)
};

// Tabulated target on a finite state space {0, ..., S-1}.
class TabulatedTarget : public TargetDensity {
 public:
  explicit TabulatedTarget(const Eigen::VectorXd& pi);

  int dim() const override { return 1; }
  double log_unnorm(const Eigen::VectorXd& x) const override;

  int states() const { return static_cast<int>(log_pi_.size()); }
  const Eigen::VectorXd& pi() const { return pi_; }

  static int state_index(const Eigen::VectorXd& x);
  static Eigen::VectorXd state_vector(int s);

 private:
  Eigen::VectorXd pi_;
  Eigen::VectorXd log_pi_;
};

// Tabulated kernel: q(y|x) = Q(y, x) with each column summing to 1.
class TabulatedKernel : public TransitionKernel {
 public:
  explicit TabulatedKernel(const Eigen::MatrixXd& q);

  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& x, RandomSource& rng) const override;

  int states() const { return static_cast<int>(q_.rows()); }
  const Eigen::MatrixXd& matrix() const { return q_; }

 private:
  Eigen::MatrixXd q_;
  Eigen::MatrixXd log_q_;
};

// log pi(x) = -beta (x^4 - x^2); modes at +-sqrt(1/2).
inline double double_well_log(double x, double beta) {
  const double x2 = x * x;
  return -beta * (x2 * x2 - x2);
}

class DoubleWellTarget : public TargetDensity {
 public:
  explicit DoubleWellTarget(double beta);

  int dim() const override { return 1; }
  double log_unnorm(const Eigen::VectorXd& x) const override {
    return double_well_log(x[0], beta_);
  }

  double beta() const { return beta_; }

 private:
  double beta_;
};

}  // namespace telemc

#endif
