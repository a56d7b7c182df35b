#ifndef TELEMC_GP_DATA_HPP
#define TELEMC_GP_DATA_HPP

#include <iosfwd>

#include <Eigen/Dense>

#include "telemc/random.hpp"

namespace telemc {

// Regression data: m input points in R^n (one per column) and observations y.
struct GPDataset {
  Eigen::MatrixXd inputs;  // n x m
  Eigen::VectorXd y;       // m

  int dim() const { return static_cast<int>(inputs.rows()); }
  int count() const { return static_cast<int>(inputs.cols()); }
};

// 0.3 + 0.4 x + 0.5 sin(2.7 x) + 1.1 / (1 + x^2)
double f_true_scalar(double x);

// Product of the scalar profile over coordinates.
double f_true(const Eigen::VectorXd& x);

// Inputs x_i ~ N(0, I_n); observations y_i = f_true(x_i) + delta_i with
// delta_i a sum of per-coordinate terms, each N(0, 0.125^2) when the
// coordinate lies in (-1.5, 1.5) and N(0, 1.25^2) otherwise.
GPDataset generate_synthetic_data(int n, int m, RandomSource& rng);

// Plain-text CSV with header `index,x_1..x_n,y`, 17 significant digits.
void write_dataset_csv(const GPDataset& data, std::ostream& os);
GPDataset read_dataset_csv(std::istream& is);

}  // namespace telemc

#endif
