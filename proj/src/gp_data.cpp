#include "telemc/gp_data.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace telemc {

double f_true_scalar(double x) {
  return 0.3 + 0.4 * x + 0.5 * std::sin(2.7 * x) + 1.1 / (1.0 + x * x);
}

double f_true(const Eigen::VectorXd& x) {
  double prod = 1.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) prod *= f_true_scalar(x[j]);
  return prod;
}

GPDataset generate_synthetic_data(int n, int m, RandomSource& rng) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("generate_synthetic_data: n and m must be >= 1");
  GPDataset data;
  data.inputs.resize(n, m);
  data.y.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) data.inputs(j, i) = rng.normal();
    double noise = 0.0;
    for (int j = 0; j < n; ++j) {
      const double sd = std::abs(data.inputs(j, i)) < 1.5 ? 0.125 : 1.25;
      noise += sd * rng.normal();
    }
    data.y[i] = f_true(data.inputs.col(i)) + noise;
  }
  return data;
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_dataset_csv(const GPDataset& data, std::ostream& os) {
  os << "index";
  for (int j = 1; j <= data.dim(); ++j) os << ",x_" << j;
  os << ",y\n";
  for (int i = 0; i < data.count(); ++i) {
    os << i;
    for (int j = 0; j < data.dim(); ++j) os << ',' << format_real(data.inputs(j, i));
    os << ',' << format_real(data.y[i]) << '\n';
  }
}

GPDataset read_dataset_csv(std::istream& is) {
  std::string line;
  do {
    if (!std::getline(is, line)) throw std::invalid_argument("dataset CSV: missing header");
  } while (line.empty() || line[0] == '#');
  int columns = 1;
  for (char c : line) columns += (c == ',');
  const int n = columns - 2;
  if (n < 1) throw std::invalid_argument("dataset CSV: malformed header");

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != columns)
      throw std::invalid_argument("dataset CSV: bad row width");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("dataset CSV: no data rows");

  GPDataset data;
  const int m = static_cast<int>(rows.size());
  data.inputs.resize(n, m);
  data.y.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) data.inputs(j, i) = rows[i][1 + j];
    data.y[i] = rows[i][columns - 1];
  }
  return data;
}

}  // namespace telemc
