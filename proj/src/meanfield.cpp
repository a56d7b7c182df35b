#include "telemc/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "telemc/errors.hpp"

namespace telemc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Grid::Grid(double lo, double hi, int points) : lo_(lo), hi_(hi), points_(points) {
  if (points < 2) throw std::invalid_argument("Grid: needs at least 2 points");
  if (!(hi > lo)) throw std::invalid_argument("Grid: hi must exceed lo");
  dx_ = (hi - lo) / (points - 1);
  nodes_.resize(points);
  for (int g = 0; g < points; ++g) nodes_[g] = lo + g * dx_;
}

GridDensity::GridDensity(Grid grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.points())
    throw std::invalid_argument("GridDensity: value count does not match grid");
  if ((values_.array() < -1e-12).any())
    throw std::invalid_argument("GridDensity: negative values");
  if (std::abs(values_.sum() * grid_.dx() - 1.0) > 1e-10)
    throw std::invalid_argument("GridDensity: mass is not 1");
}

GridKernel::GridKernel(Grid grid, Eigen::MatrixXd matrix)
    : grid_(std::move(grid)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != grid_.points() || matrix_.cols() != grid_.points())
    throw std::invalid_argument("GridKernel: matrix shape does not match grid");
  if ((matrix_.array() < 0.0).any())
    throw std::invalid_argument("GridKernel: negative entries");
  for (int h = 0; h < grid_.points(); ++h) {
    if (std::abs(matrix_.col(h).sum() * grid_.dx() - 1.0) > 1e-10)
      throw std::invalid_argument("GridKernel: column does not integrate to 1");
  }
}

GridKernel build_grid_kernel(const Grid& grid, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("build_grid_kernel: sigma must be positive");
  const int n = grid.points();
  Eigen::MatrixXd Q(n, n);
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  for (int h = 0; h < n; ++h) {
    for (int g = 0; g < n; ++g) {
      const double d = grid.nodes()[g] - grid.nodes()[h];
      Q(g, h) = std::exp(-d * d * inv_two_sigma2);
    }
    Q.col(h) /= Q.col(h).sum() * grid.dx();
  }
  return GridKernel(grid, std::move(Q));
}

GridKernel metropolize_kernel(const GridKernel& Q, const GridDensity& pi) {
  const Eigen::VectorXd& p = pi.values();
  if ((p.array() <= 0.0).any())
    throw std::invalid_argument("metropolize_kernel: pi must be strictly positive");
  const Eigen::MatrixXd& q = Q.matrix();
  const int n = static_cast<int>(q.rows());
  Eigen::MatrixXd out(n, n);
  for (int h = 0; h < n; ++h) {
    double rejected = 0.0;
    for (int g = 0; g < n; ++g) {
      if (g == h) continue;
      double moved = q(g, h);
      if (moved > 0.0) {
        const double ratio = (p[g] * q(h, g)) / (p[h] * q(g, h));
        if (ratio < 1.0) moved *= ratio;
      }
      out(g, h) = moved;
      rejected += q(g, h) - moved;
    }
    out(h, h) = q(h, h) + rejected;
  }
  return GridKernel(Q.grid(), std::move(out));
}

NonlinearRhs nonlinear_rhs(const GridKernel& Q, const Eigen::VectorXd& rho,
                           const Eigen::VectorXd& pi) {
  // Evaluate on the normalized density. On the unit-mass manifold this is the
  // same vector field, but the unnormalized form carries an unstable mass mode
  // (d/dt of the mass defect equals the defect itself), which would amplify
  // float rounding as e^t over long integrations.
  const double mass = rho.sum() * Q.dx();
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw NonFiniteRhs("nonlinear_rhs: density mass zero or non-finite");
  const Eigen::VectorXd rho_hat = rho / mass;
  const Eigen::VectorXd q_rho = Q.apply(rho_hat);
  const Eigen::ArrayXd likelihood_ratio = rho_hat.array() / pi.array();
  const double z_rho = (q_rho.array() / pi.array() * rho_hat.array()).sum() * Q.dx();
  if (!(z_rho > 0.0) || !std::isfinite(z_rho))
    throw NonFiniteRhs("nonlinear_rhs: Z_rho zero or non-finite");
  NonlinearRhs out;
  out.z_rho = z_rho;
  out.rhs = ((z_rho - likelihood_ratio) * q_rho.array() / z_rho).matrix();
  return out;
}

Eigen::VectorXd linear_rhs(const GridKernel& Q_metropolized, const Eigen::VectorXd& rho) {
  return Q_metropolized.apply(rho) - rho;
}

double e_statistic(const Grid& grid, const Eigen::VectorXd& rho) {
  if (!grid.spans_zero())
    throw std::invalid_argument("e_statistic: grid must span negative and positive reals");
  const double zero_tol = 1e-9 * grid.dx();
  double integral = 0.0;
  for (int g = 0; g < grid.points(); ++g) {
    const double x = grid.nodes()[g];
    if (std::abs(x) <= zero_tol)
      integral += 0.5 * rho[g];
    else if (x > 0.0)
      integral += rho[g];
  }
  return 0.5 - integral * grid.dx();
}

double chi2_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double dx) {
  double acc = 0.0;
  for (Eigen::Index g = 0; g < p.size(); ++g) {
    if (q[g] <= 0.0) {
      if (p[g] > 0.0) return kInf;
      continue;
    }
    acc += p[g] * p[g] / q[g];
  }
  return acc * dx - 1.0;
}

TrajectoryRecord euler_integrate(DynamicsKind kind, const GridKernel& kernel,
                                 const GridDensity& pi, const GridDensity& rho0,
                                 const IntegratorOptions& options) {
  if (!(options.dt > 0.0)) throw std::invalid_argument("euler_integrate: dt must be positive");
  if (options.record_stride < 1)
    throw std::invalid_argument("euler_integrate: record_stride must be at least 1");
  const Grid& grid = kernel.grid();
  const Eigen::VectorXd& pi_v = pi.values();
  Eigen::VectorXd rho = rho0.values();

  const long n_steps = static_cast<long>(std::llround(options.t_end / options.dt));
  const bool track_e = grid.spans_zero();

  TrajectoryRecord record;
  auto observe = [&](long step) {
    const double t = step * options.dt;
    record.times.push_back(t);
    if (track_e) record.e_stat.push_back(e_statistic(grid, rho));
    record.chi2.push_back(chi2_divergence(pi_v, rho, grid.dx()));
    record.min_rho.push_back(rho.minCoeff());
    record.mass.push_back(rho.sum() * grid.dx());
  };

  // Each requested time fires once, at the first step reaching it.
  std::vector<double> snapshot_times = options.snapshot_times;
  std::sort(snapshot_times.begin(), snapshot_times.end());
  std::size_t next_snapshot = 0;
  auto maybe_snapshot = [&](long step) {
    const double t = step * options.dt;
    while (next_snapshot < snapshot_times.size() &&
           t >= snapshot_times[next_snapshot] - 0.5 * options.dt) {
      record.snapshots.push_back({t, rho});
      ++next_snapshot;
    }
  };

  observe(0);
  maybe_snapshot(0);
  for (long step = 1; step <= n_steps; ++step) {
    if (kind == DynamicsKind::kNonlinear) {
      rho += options.dt * nonlinear_rhs(kernel, rho, pi_v).rhs;
    } else {
      rho += options.dt * linear_rhs(kernel, rho);
    }
    const double lowest = rho.minCoeff();
    if (lowest < options.negativity_budget)
      throw NegativityBreach("euler_integrate: density fell below the negativity budget");
    if (step % options.record_stride == 0 || step == n_steps) observe(step);
    maybe_snapshot(step);
  }
  record.final_rho = std::move(rho);
  return record;
}

DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values,
                        const FitWindow& window) {
  if (times.size() != values.size())
    throw std::invalid_argument("fit_decay_rate: series length mismatch");
  double v_max = 0.0;
  for (double v : values) v_max = std::max(v_max, v);
  const double hi = window.upper_fraction * v_max;
  const double lo = window.floor_factor * std::numeric_limits<double>::epsilon() * v_max;

  std::vector<double> t_fit, log_v;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] > lo && values[k] < hi) {
      t_fit.push_back(times[k]);
      log_v.push_back(std::log(values[k]));
    }
  }
  if (t_fit.size() < 10)
    throw InsufficientWindow("fit_decay_rate: fewer than 10 points in the tail window");

  const double n = static_cast<double>(t_fit.size());
  double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0, svv = 0.0;
  for (std::size_t k = 0; k < t_fit.size(); ++k) {
    st += t_fit[k];
    sv += log_v[k];
    stt += t_fit[k] * t_fit[k];
    stv += t_fit[k] * log_v[k];
    svv += log_v[k] * log_v[k];
  }
  const double denom = n * stt - st * st;
  if (denom == 0.0) throw InsufficientWindow("fit_decay_rate: degenerate time window");
  const double slope = (n * stv - st * sv) / denom;
  const double offset = (sv - slope * st) / n;

  const double ss_tot = svv - sv * sv / n;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < t_fit.size(); ++k) {
    const double r = log_v[k] - (offset + slope * t_fit[k]);
    ss_res += r * r;
  }

  DecayFit fit;
  fit.rate = -slope;
  fit.intercept = std::exp(offset);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  fit.points = static_cast<int>(t_fit.size());
  fit.t_first = t_fit.front();
  fit.t_last = t_fit.back();
  return fit;
}

}  // namespace telemc
