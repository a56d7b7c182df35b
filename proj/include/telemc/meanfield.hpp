#ifndef TELEMC_MEANFIELD_HPP
#define TELEMC_MEANFIELD_HPP

#include <vector>

#include <Eigen/Dense>

namespace telemc {

// Uniform 1-D grid on [lo, hi] with `points` nodes; quadrature weight dx per
// node. A finite state space is the dx = 1 grid on {0, ..., S-1}.
class Grid {
 public:
  Grid(double lo, double hi, int points);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int points() const { return points_; }
  double dx() const { return dx_; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  bool spans_zero() const { return lo_ < 0.0 && hi_ > 0.0; }

 private:
  double lo_, hi_, dx_;
  int points_;
  Eigen::VectorXd nodes_;
};

// Probability density on a grid: nonnegative values integrating to 1.
class GridDensity {
 public:
  GridDensity(Grid grid, Eigen::VectorXd values);

  // Evaluates `unnormalized` on the nodes and normalizes; used for targets
  // and initial conditions given in closed form.
  template <typename F>
  static GridDensity from_function(const Grid& grid, F&& unnormalized) {
    Eigen::VectorXd v(grid.points());
    for (int g = 0; g < grid.points(); ++g) v[g] = unnormalized(grid.nodes()[g]);
    v /= v.sum() * grid.dx();
    return GridDensity(grid, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  Grid grid_;
  Eigen::VectorXd values_;
};

// Transition operator on grid densities: column h holds the density q(.|x_h),
// so each column integrates to 1 under the dx weighting and the operator acts
// as rho -> Q rho dx.
class GridKernel {
 public:
  GridKernel(Grid grid, Eigen::MatrixXd matrix);

  const Grid& grid() const { return grid_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  double dx() const { return grid_.dx(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& rho) const { return matrix_ * rho * dx(); }

 private:
  Grid grid_;
  Eigen::MatrixXd matrix_;
};

// Gaussian proposal kernel Q(g,h) proportional to exp(-(x_g - x_h)^2 / (2 sigma^2)),
// boundary truncation absorbed by per-column normalization.
GridKernel build_grid_kernel(const Grid& grid, double sigma);

// Metropolis correction of Q with respect to pi: off-diagonal entries scaled
// by min(1, pi_g Q(h,g) / (pi_h Q(g,h))), rejected mass absorbed into the
// diagonal so each column still integrates to 1, and Q~ pi = pi.
GridKernel metropolize_kernel(const GridKernel& Q, const GridDensity& pi);

struct NonlinearRhs {
  Eigen::VectorXd rhs;
  double z_rho;
};

// rhs = Z^{-1} [Z - rho/pi] Q rho with Z = integral of (Q rho / pi) rho.
// Throws NonFiniteRhs when Z is zero or non-finite.
NonlinearRhs nonlinear_rhs(const GridKernel& Q, const Eigen::VectorXd& rho,
                           const Eigen::VectorXd& pi);

// rhs = Q~ rho - rho for the Metropolized kernel.
Eigen::VectorXd linear_rhs(const GridKernel& Q_metropolized, const Eigen::VectorXd& rho);

enum class DynamicsKind { kNonlinear, kLinear };

struct IntegratorOptions {
  double dt = 0.01;
  double t_end = 1.0;
  int record_stride = 1;             // observer sampling period, in steps
  std::vector<double> snapshot_times;  // full-density dumps at nearest steps
  double negativity_budget = -1e-8;  // abort threshold for min rho
};

struct Snapshot {
  double t;
  Eigen::VectorXd rho;
};

// Observer series sampled every record_stride steps (step 0 included).
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> e_stat;    // empty when the grid does not span zero
  std::vector<double> chi2;      // chi^2(pi || rho_t)
  std::vector<double> min_rho;
  std::vector<double> mass;
  std::vector<Snapshot> snapshots;
  Eigen::VectorXd final_rho;
};

// Forward Euler integration of either dynamics. Aborts with NegativityBreach
// if min rho falls below the negativity budget (no clamping).
TrajectoryRecord euler_integrate(DynamicsKind kind, const GridKernel& kernel,
                                 const GridDensity& pi, const GridDensity& rho0,
                                 const IntegratorOptions& options);

// E = 1/2 - integral of rho over x >= 0 (a node at x = 0 counts half).
double e_statistic(const Grid& grid, const Eigen::VectorXd& rho);

// chi^2(p || q) = integral p^2/q - 1; +inf if q vanishes where p does not.
double chi2_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double dx);

struct FitWindow {
  // Tail selection: value < upper_fraction * max(value) and
  // value > floor_factor * eps * max(value).
  double upper_fraction = 0.1;
  double floor_factor = 100.0;
};

struct DecayFit {
  double rate;       // 1/alpha in value = C exp(-t/alpha)
  double intercept;  // C
  double r_squared;
  int points;
  double t_first, t_last;
};

// Least-squares line through (t, ln value) on the tail window; throws
// InsufficientWindow when fewer than 10 points qualify.
DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& values,
                        const FitWindow& window = {});

}  // namespace telemc

#endif
