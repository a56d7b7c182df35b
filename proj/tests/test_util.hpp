#ifndef TELEMC_TEST_UTIL_HPP
#define TELEMC_TEST_UTIL_HPP

#include <Eigen/Dense>

#include "telemc/target.hpp"

namespace telemc::test {

inline Eigen::VectorXd scalar_state(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

// 3-state instance with non-trivial pi and kernel, used across hand checks.
inline Eigen::VectorXd pi3() {
  Eigen::VectorXd pi(3);
  pi << 0.5, 0.3, 0.2;
  return pi;
}

inline Eigen::MatrixXd q3() {
  Eigen::MatrixXd q(3, 3);
  // columns: q(.|a), q(.|b), q(.|c)
  q << 0.6, 0.2, 0.25,
       0.3, 0.5, 0.25,
       0.1, 0.3, 0.5;
  return q;
}

// Independence kernel whose every column equals pi: the perfect proposal.
inline Eigen::MatrixXd perfect_kernel(const Eigen::VectorXd& pi) {
  const int s = static_cast<int>(pi.size());
  Eigen::MatrixXd q(s, s);
  for (int c = 0; c < s; ++c) q.col(c) = pi;
  return q;
}

}  // namespace telemc::test

#endif
