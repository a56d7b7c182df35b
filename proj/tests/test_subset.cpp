#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "telemc/errors.hpp"
#include "telemc/sampler.hpp"
#include "telemc/subset.hpp"
#include "telemc/target.hpp"
#include "test_util.hpp"

using namespace telemc;
using telemc::test::scalar_state;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Tabulated joint density on {0..U-1} x {0..V-1}, states coded as 2-vectors.
struct TableTarget : TargetDensity {
  Eigen::MatrixXd table;  // (u, v)

  explicit TableTarget(Eigen::MatrixXd t) : table(std::move(t)) {}
  int dim() const override { return 2; }
  double log_unnorm(const Eigen::VectorXd& x) const override {
    const int u = static_cast<int>(std::lround(x[0]));
    const int v = static_cast<int>(std::lround(x[1]));
    if (u < 0 || u >= table.rows() || v < 0 || v >= table.cols()) return kNegInf;
    return std::log(table(u, v));
  }
};

Eigen::MatrixXd joint_2x2_table() {
  Eigen::MatrixXd t(2, 2);
  t << 0.3, 0.2,
       0.1, 0.4;
  return t;
}

Eigen::MatrixXd u_kernel_2() {
  Eigen::MatrixXd q(2, 2);
  q << 0.7, 0.4,
       0.3, 0.6;
  return q;
}

Eigen::MatrixXd v_kernel_2() {
  Eigen::MatrixXd r(2, 2);
  r << 0.8, 0.3,
       0.2, 0.7;
  return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("subset_weights: single walker gets weight one") {
  const TableTarget target(joint_2x2_table());
  const TabulatedKernel u_kernel(u_kernel_2());
  Eigen::MatrixXd u(1, 1), v(1, 1);
  u << 0;
  v << 1;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  const SubsetWeightComputation w = subset_weights(ensemble, scalar_state(1), target, u_kernel);
  CHECK(w.weights.size() == 1);
  CHECK(w.weights[0] == 1.0);
}

TEST_CASE("subset_weights: hand evaluation on the 2x2 product space") {
  const Eigen::MatrixXd table = joint_2x2_table();
  const Eigen::MatrixXd q1 = u_kernel_2();
  const TableTarget target(table);
  const TabulatedKernel u_kernel(q1);
  Eigen::MatrixXd u(1, 2), v(1, 2);
  u << 0, 1;
  v << 0, 1;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  const int zs = 1;
  const SubsetWeightComputation w =
      subset_weights(ensemble, scalar_state(zs), target, u_kernel);

  // direct arithmetic on the displayed formula
  const double num0 = table(zs, 0) * (q1(0, zs) + q1(0, 1)) / table(0, 0);
  const double num1 = table(zs, 1) * (q1(1, zs) + q1(1, 0)) / table(1, 1);
  const double z_total = num0 + num1;
  CHECK(w.weights[0] == doctest::Approx(num0 / z_total).epsilon(1e-13));
  CHECK(w.weights[1] == doctest::Approx(num1 / z_total).epsilon(1e-13));
  CHECK(std::abs(w.weights.sum() - 1.0) < 1e-12);
  const Eigen::VectorXd numerators = w.per_walker_numerators();
  for (int i = 0; i < 2; ++i)
    CHECK(w.weights[i] * w.z_value() == doctest::Approx(numerators[i]).epsilon(1e-12));
}

TEST_CASE("subset_weights: a v-independent target reduces to the plain weights") {
  // pi(u, v) = pi1(u): the extra factor is a scalar and cancels
  Eigen::MatrixXd table(3, 2);
  table << 0.25, 0.25,
           0.15, 0.15,
           0.10, 0.10;
  const TableTarget target(table);
  const TabulatedKernel u_kernel(telemc::test::q3());
  Eigen::MatrixXd u(1, 3), v(1, 3);
  u << 0, 1, 2;
  v << 0, 1, 0;
  SplitEnsemble split(u, v, target, u_kernel);

  const TabulatedTarget plain_target(Eigen::Vector3d(0.5, 0.3, 0.2));
  WalkerEnsemble plain(u, plain_target, u_kernel);

  for (int zs = 0; zs < 3; ++zs) {
    const SubsetWeightComputation ws =
        subset_weights(split, scalar_state(zs), target, u_kernel);
    const WeightComputation wp =
        importance_weights(plain, scalar_state(zs), plain_target, u_kernel);
    CHECK((ws.weights - wp.weights).cwiseAbs().maxCoeff() < 1e-14);
    for (int i = 0; i < 3; ++i) {
      const double a_subset =
          subset_acceptance_probability(split, i, scalar_state(zs), target, u_kernel);
      const double a_plain =
          acceptance_probability(plain, i, scalar_state(zs), plain_target, u_kernel);
      CHECK(a_subset == doctest::Approx(a_plain).epsilon(1e-12));
    }
  }
}

TEST_CASE("subset acceptance: identity move is certain") {
  const TableTarget target(joint_2x2_table());
  const TabulatedKernel u_kernel(u_kernel_2());
  Eigen::MatrixXd u(1, 2), v(1, 2);
  u << 0, 1;
  v << 1, 0;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  CHECK(subset_acceptance_probability(ensemble, 1, scalar_state(1), target, u_kernel) == 1.0);
}

TEST_CASE("interacting stage preserves the product law (exact enumeration)") {
  const Eigen::MatrixXd table = joint_2x2_table();
  const Eigen::MatrixXd q1 = u_kernel_2();
  const TableTarget target(table);
  const TabulatedKernel u_kernel(q1);

  // ensemble state: walker codes c_i = u_i + 2 v_i, index = c_0 + 4 c_1
  const auto decode = [](int code, int* u, int* v) {
    *u = code % 2;
    *v = code / 2;
  };

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(16, 16);
  Eigen::VectorXd Pi(16);
  for (int from = 0; from < 16; ++from) {
    int u0, v0, u1, v1;
    decode(from % 4, &u0, &v0);
    decode(from / 4, &u1, &v1);
    Pi[from] = table(u0, v0) * table(u1, v1);

    Eigen::MatrixXd u(1, 2), v(1, 2);
    u << u0, u1;
    v << v0, v1;
    SplitEnsemble ensemble(u, v, target, u_kernel);
    for (int j = 0; j < 2; ++j) {
      const int uj = j == 0 ? u0 : u1;
      for (int zs = 0; zs < 2; ++zs) {
        const double propose = 0.5 * q1(zs, uj);
        const SubsetWeightComputation w =
            subset_weights(ensemble, scalar_state(zs), target, u_kernel);
        for (int i = 0; i < 2; ++i) {
          const double accept =
              subset_acceptance_probability(ensemble, i, scalar_state(zs), target, u_kernel);
          const int to = i == 0 ? (zs + 2 * v0) + 4 * (u1 + 2 * v1)
                                : (u0 + 2 * v0) + 4 * (zs + 2 * v1);
          P(to, from) += propose * w.weights[i] * accept;
          P(from, from) += propose * w.weights[i] * (1.0 - accept);
        }
      }
    }
  }
  for (int c = 0; c < 16; ++c) CHECK(std::abs(P.col(c).sum() - 1.0) < 1e-13);
  CHECK((P * Pi - Pi).cwiseAbs().maxCoeff() < 1e-12);

  SUBCASE("the sweep stage and the composition preserve the product law too") {
    const Eigen::MatrixXd r = v_kernel_2();
    // per-walker v transition given u: 2x2 Metropolis matrix
    const auto v_matrix = [&](int u) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 2);
      for (int v = 0; v < 2; ++v) {
        const int vp = 1 - v;
        const double ratio = (table(u, vp) * r(v, vp)) / (table(u, v) * r(vp, v));
        const double moved = r(vp, v) * std::min(1.0, ratio);
        M(vp, v) = moved;
        M(v, v) = r(v, v) + (r(vp, v) - moved);
      }
      return M;
    };
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(16, 16);
    for (int from = 0; from < 16; ++from) {
      int u0, v0, u1, v1;
      decode(from % 4, &u0, &v0);
      decode(from / 4, &u1, &v1);
      const Eigen::MatrixXd M0 = v_matrix(u0);
      const Eigen::MatrixXd M1 = v_matrix(u1);
      for (int v0p = 0; v0p < 2; ++v0p)
        for (int v1p = 0; v1p < 2; ++v1p) {
          const int to = (u0 + 2 * v0p) + 4 * (u1 + 2 * v1p);
          S(to, from) += M0(v0p, v0) * M1(v1p, v1);
        }
    }
    CHECK((S * Pi - Pi).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd total = S * P;  // one interacting step, then a sweep
    CHECK((total * Pi - Pi).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("independent_sweep: preconditions and the flat conditional") {
  const TableTarget target(joint_2x2_table());
  const TabulatedKernel u_kernel(u_kernel_2());
  const TabulatedKernel v_kernel(v_kernel_2());
  Eigen::MatrixXd u(1, 2), v(1, 2);
  u << 0, 1;
  v << 0, 1;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  RandomSource rng(3);
  CHECK_THROWS_AS(independent_sweep(ensemble, target, v_kernel, 0, rng),
                  std::invalid_argument);

  // target independent of v with a symmetric proposal: every update accepted
  Eigen::MatrixXd flat(2, 2);
  flat << 0.3, 0.3,
          0.2, 0.2;
  const TableTarget flat_target(flat);
  Eigen::MatrixXd sym(2, 2);
  sym << 0.5, 0.5,
         0.5, 0.5;
  const TabulatedKernel sym_kernel(sym);
  SplitEnsemble flat_ensemble(u, v, flat_target, u_kernel);
  const SweepStats stats = independent_sweep(flat_ensemble, flat_target, sym_kernel, 1, rng);
  CHECK(stats.total_acceptances() == stats.total_proposals());
}

TEST_CASE("independent_sweep: samples a Gaussian conditional") {
  // pi(u, v) = N(v; 0, 1), r = N(v, 0.5^2), one walker
  struct GaussianV : TargetDensity {
    int dim() const override { return 2; }
    double log_unnorm(const Eigen::VectorXd& x) const override {
      return -0.5 * x[1] * x[1];
    }
  };
  const GaussianV target;
  const GaussianKernel u_kernel(1, 1.0);
  const GaussianKernel v_kernel(1, 0.25);
  Eigen::MatrixXd u(1, 1), v(1, 1);
  u << 0.0;
  v << 0.0;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  RandomSource rng(5);

  const int sweeps = 100000;
  std::vector<double> samples;
  samples.reserve(sweeps);
  long accepted = 0;
  for (int k = 0; k < sweeps; ++k) {
    accepted += independent_sweep(ensemble, target, v_kernel, 1, rng).total_acceptances();
    samples.push_back(ensemble.v_walkers()(0, 0));
  }

  const double acceptance = accepted / double(sweeps);
  CHECK(acceptance > 0.6);
  CHECK(acceptance < 0.95);

  std::sort(samples.begin(), samples.end());
  double ks = 0.0;
  for (int k = 0; k < sweeps; ++k) {
    const double cdf = normal_cdf(samples[k]);
    ks = std::max(ks, std::abs(cdf - (k + 1.0) / sweeps));
    ks = std::max(ks, std::abs(cdf - k / double(sweeps)));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("interacting_step auto-rejects proposals outside every conditional support") {
  struct PositiveU : TargetDensity {
    int dim() const override { return 2; }
    double log_unnorm(const Eigen::VectorXd& x) const override {
      if (x[0] <= 0.0) return kNegInf;
      return -x[0] - 0.5 * x[1] * x[1];
    }
  };
  const PositiveU target;
  const GaussianKernel u_kernel(1, 1.0);
  Eigen::MatrixXd u(1, 3), v(1, 3);
  u << 0.1, 0.4, 1.0;
  v << 0.0, 0.2, -0.1;
  SplitEnsemble ensemble(u, v, target, u_kernel);
  RandomSource rng(7);

  int auto_rejected = 0;
  for (int k = 0; k < 2000; ++k) {
    const StepOutcome outcome = interacting_step(ensemble, target, u_kernel, rng);
    CHECK((ensemble.u_walkers().array() > 0.0).all());
    if (outcome.out_of_support) {
      ++auto_rejected;
      CHECK(!outcome.accepted);
    }
  }
  CHECK(auto_rejected > 0);
}

TEST_CASE("alternating_step with an empty v-block replays the plain ensemble chain") {
  const double beta = 5.0;
  const DoubleWellTarget plain_target(beta);
  const GaussianKernel kernel(1, 0.25 * 0.25);

  struct WrappedTarget : TargetDensity {
    double beta;
    explicit WrappedTarget(double b) : beta(b) {}
    int dim() const override { return 1; }
    double log_unnorm(const Eigen::VectorXd& x) const override {
      return double_well_log(x[0], beta);
    }
  };
  const WrappedTarget joint_target(beta);
  const GaussianKernel v_kernel{Eigen::VectorXd(0)};

  Eigen::MatrixXd u0(1, 6);
  u0 << -0.9, -0.7, -0.5, 0.5, 0.7, 0.9;
  WalkerEnsemble plain(u0, plain_target, kernel);
  SplitEnsemble split(u0, Eigen::MatrixXd(0, 6), joint_target, kernel);

  RandomSource rng_plain(99), rng_split(99);
  for (int k = 0; k < 500; ++k) {
    const StepOutcome a = ensemble_step(plain, plain_target, kernel, rng_plain);
    const AlternatingOutcome b =
        alternating_step(split, joint_target, kernel, v_kernel, 1, rng_split);
    CHECK(a.clone_index == b.interacting.clone_index);
    CHECK(a.deletion_index == b.interacting.deletion_index);
    CHECK(a.accepted == b.interacting.accepted);
  }
  CHECK((plain.walkers() - split.u_walkers()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the interacting stage is independent of relative conditional normalizations") {
  struct Banana : TargetDensity {
    double v_tilt = 0.0;  // adds log c(v), reweighting the conditionals
    int dim() const override { return 2; }
    double log_unnorm(const Eigen::VectorXd& x) const override {
      const double u = x[0], v = x[1];
      return -0.5 * (u * u + (v - u * u) * (v - u * u)) +
             v_tilt * (2.0 + std::sin(3.0 * v));
    }
  };
  Banana base;
  Banana tilted;
  tilted.v_tilt = 0.7;

  const GaussianKernel u_kernel(1, 0.3 * 0.3);
  Eigen::MatrixXd u0(1, 5), v0(1, 5);
  u0 << -1.0, -0.5, 0.0, 0.5, 1.0;
  v0 << 0.8, 0.1, -0.2, 0.4, 1.2;

  SplitEnsemble a(u0, v0, base, u_kernel);
  SplitEnsemble b(u0, v0, tilted, u_kernel);

  // the weights and acceptance agree pointwise
  const Eigen::VectorXd z = scalar_state(0.3);
  const SubsetWeightComputation wa = subset_weights(a, z, base, u_kernel);
  const SubsetWeightComputation wb = subset_weights(b, z, tilted, u_kernel);
  CHECK((wa.weights - wb.weights).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 5; ++i)
    CHECK(subset_acceptance_probability(a, i, z, base, u_kernel) ==
          doctest::Approx(subset_acceptance_probability(b, i, z, tilted, u_kernel))
              .epsilon(1e-12));

  // and whole interacting trajectories coincide under a common seed
  RandomSource rng_a(123), rng_b(123);
  for (int k = 0; k < 300; ++k) {
    interacting_step(a, base, u_kernel, rng_a);
    interacting_step(b, tilted, u_kernel, rng_b);
  }
  CHECK((a.u_walkers() - b.u_walkers()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("split ensemble caches stay coherent") {
  struct Joint : TargetDensity {
    int dim() const override { return 3; }
    double log_unnorm(const Eigen::VectorXd& x) const override {
      return -0.5 * x.squaredNorm() - 0.1 * x[0] * x[2];
    }
  };
  const Joint target;
  const GaussianKernel u_kernel(2, 0.2);
  const GaussianKernel v_kernel(1, 0.2);
  RandomSource rng(13);
  Eigen::MatrixXd u(2, 8), v(1, 8);
  for (int i = 0; i < 8; ++i) {
    u(0, i) = rng.normal();
    u(1, i) = rng.normal();
    v(0, i) = rng.normal();
  }
  SplitEnsemble ensemble(u, v, target, u_kernel);
  SamplerOptions options;
  options.cache_rebuild_interval = 0;
  for (int k = 0; k < 3000; ++k)
    alternating_step(ensemble, target, u_kernel, v_kernel, 3, rng, options);
  CHECK(ensemble.max_kernel_sum_error(u_kernel) < 1e-8);
  for (int i = 0; i < 8; ++i)
    CHECK(ensemble.cached_log_pi()[i] ==
          doctest::Approx(target.log_unnorm(ensemble.joint_state(i))).epsilon(1e-12));
}
