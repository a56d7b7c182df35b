#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "telemc/distributions.hpp"
#include "telemc/errors.hpp"
#include "telemc/gp.hpp"
#include "telemc/gp_data.hpp"
#include "telemc/random.hpp"
#include "telemc/target.hpp"

#include <sstream>

using namespace telemc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Simpson quadrature on [a, b].
template <typename F>
double simpson(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int k = 1; k < panels; ++k) acc += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Integral of f over (0, inf) via x = u / (1 - u). The endpoints are clamped
// slightly inside (0, 1): for tails like 1/x^2 the transformed integrand has a
// finite nonzero limit at u = 1.
template <typename F>
double integrate_half_line(F&& f, int panels = 40000) {
  return simpson(
      [&](double u) {
        const double uc = std::min(std::max(u, 1e-9), 1.0 - 1e-9);
        const double x = uc / (1.0 - uc);
        const double jac = 1.0 / ((1.0 - uc) * (1.0 - uc));
        return f(x) * jac;
      },
      0.0, 1.0, panels);
}

template <typename F>
double integrate_real_line(F&& f, int panels = 40000) {
  return simpson(
      [&](double u) {
        if (u <= -1.0 || u >= 1.0) return 0.0;
        const double x = u / (1.0 - u * u);
        const double jac = (1.0 + u * u) / ((1.0 - u * u) * (1.0 - u * u));
        return f(x) * jac;
      },
      -1.0, 1.0, panels);
}

}  // namespace

TEST_CASE("Gaussian kernel: normalization and symmetry") {
  const GaussianKernel kernel(1, 0.7);
  Eigen::VectorXd x(1);
  x << 0.4;
  const double mass = integrate_real_line([&](double y) {
    Eigen::VectorXd yv(1);
    yv << y;
    return std::exp(kernel.log_density(yv, x));
  });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  RandomSource rng(21);
  const GaussianKernel kernel3(3, 0.25);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd a(3), b(3);
    for (int j = 0; j < 3; ++j) {
      a[j] = rng.normal();
      b[j] = rng.normal();
    }
    CHECK(kernel3.log_density(a, b) == kernel3.log_density(b, a));
  }
}

TEST_CASE("double well log density") {
  CHECK(double_well_log(0.0, 7.3) == 0.0);
  CHECK(double_well_log(std::sqrt(0.5), 5.0) == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(double_well_log(-std::sqrt(0.5), 5.0) == doctest::Approx(1.25).epsilon(1e-14));
  RandomSource rng(1);
  for (int k = 0; k < 100; ++k) {
    const double x = 4.0 * rng.normal();
    CHECK(double_well_log(x, 2.5) == double_well_log(-x, 2.5));
  }
}

TEST_CASE("squared-exponential kernel, scalar mode") {
  RandomSource rng(2);
  Eigen::MatrixXd inputs(1, 4);
  inputs << -1.2, 0.0, 0.4, 2.0;
  const double alpha = 1.7;
  const Eigen::MatrixXd K = se_kernel_matrix(inputs, alpha, 0.9);
  for (int i = 0; i < 4; ++i) CHECK(K(i, i) == alpha * alpha);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // two points at distance rho
  Eigen::MatrixXd pair(1, 2);
  pair << 0.3, 0.3 + 0.9;
  const Eigen::MatrixXd Kp = se_kernel_matrix(pair, alpha, 0.9);
  CHECK(Kp(0, 1) == doctest::Approx(alpha * alpha * std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("squared-exponential kernel, matrix metric reduces to scalar mode") {
  Eigen::MatrixXd inputs(1, 5);
  inputs << -2.0, -0.5, 0.0, 1.0, 1.5;
  const double rho = 0.8;
  Eigen::MatrixXd L(1, 1);
  L << 1.0 / rho;
  const Eigen::MatrixXd Ka = se_kernel_matrix(inputs, 1.3, rho);
  const Eigen::MatrixXd Kb = se_kernel_matrix(inputs, 1.3, L);
  CHECK((Ka - Kb).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cholesky_jittered") {
  SUBCASE("identity succeeds at the first jitter level") {
    const CholeskyFactor f = cholesky_jittered(Eigen::MatrixXd::Identity(3, 3));
    CHECK(f.jitter_used == 1e-10);
    CHECK((f.L - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("rank-1 matrix factors with jitter and reconstructs") {
    Eigen::VectorXd v(3);
    v << 1.0, -2.0, 0.5;
    const Eigen::MatrixXd A = v * v.transpose();
    const CholeskyFactor f = cholesky_jittered(A);
    CHECK(f.jitter_used <= 1e-6 * A.diagonal().mean());
    Eigen::MatrixXd jittered = A;
    jittered.diagonal().array() += f.jitter_used;
    CHECK((f.L * f.L.transpose() - jittered).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("2x2 closed form") {
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 1.0, 1.0, 2.0;
    const CholeskyFactor f = cholesky_jittered(A);
    // closed-form factor of the jittered matrix
    const double a = 2.0 + f.jitter_used;
    const double l00 = std::sqrt(a);
    const double l10 = 1.0 / l00;
    const double l11 = std::sqrt(a - l10 * l10);
    CHECK(f.L(0, 0) == doctest::Approx(l00).epsilon(1e-12));
    CHECK(f.L(1, 0) == doctest::Approx(l10).epsilon(1e-12));
    CHECK(f.L(1, 1) == doctest::Approx(l11).epsilon(1e-12));
    CHECK(f.L(0, 1) == 0.0);
    // and the unjittered closed form to jitter accuracy
    CHECK(f.L(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  }
  SUBCASE("indefinite matrix is not factorizable") {
    Eigen::MatrixXd A(2, 2);
    A << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(cholesky_jittered(A), NotFactorizable);
  }
}

TEST_CASE("kernel matrices pass the jittered factorization cheaply") {
  RandomSource rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + rng.uniform_int(20);
    Eigen::MatrixXd inputs(1, m);
    for (int i = 0; i < m; ++i) inputs(0, i) = 3.0 * rng.normal();
    const double alpha = 0.2 + 2.0 * rng.uniform();
    const double rho = 0.2 + 2.0 * rng.uniform();
    const Eigen::MatrixXd K = se_kernel_matrix(inputs, alpha, rho);
    const CholeskyFactor f = cholesky_jittered(K);
    CHECK(f.jitter_used <= 1e-8 * K.diagonal().mean());
  }
}

TEST_CASE("half-Cauchy log pdf") {
  const double peak = std::log(2.0 / (3.0 * 3.14159265358979323846));
  CHECK(half_cauchy_log_pdf(1e-12, 3.0) == doctest::Approx(peak).epsilon(1e-12));
  CHECK(half_cauchy_log_pdf(3.0, 3.0) ==
        doctest::Approx(peak - std::log(2.0)).epsilon(1e-12));
  CHECK(half_cauchy_log_pdf(0.0, 3.0) == -kInf);
  CHECK(half_cauchy_log_pdf(-1.0, 3.0) == -kInf);
  const double mass =
      integrate_half_line([](double x) { return std::exp(half_cauchy_log_pdf(x, 3.0)); });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Student-t log pdf") {
  // t(nu=2, scale=1) at 0 is 1/(2 sqrt(2))
  CHECK(student_t_log_pdf(0.0, 2.0, 1.0) ==
        doctest::Approx(std::log(1.0 / (2.0 * std::sqrt(2.0)))).epsilon(1e-12));
  const double mass = integrate_real_line(
      [](double x) { return std::exp(student_t_log_pdf(x, 2.0, 1.4)); });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("standard normal log pdf integrates to one") {
  const double mass = integrate_real_line(
      [](double x) { return std::exp(standard_normal_log_pdf(x)); });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("chi log pdf") {
  // k = 2: ln x - x^2/2
  CHECK(chi_log_pdf(1.0, 2.0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(chi_log_pdf(0.7, 2.0) ==
        doctest::Approx(std::log(0.7) - 0.245).epsilon(1e-13));
  // k = 1: -(1/2) ln(pi/2) - x^2/2
  const double c = 1.3;
  CHECK(chi_log_pdf(c, 1.0) ==
        doctest::Approx(-0.5 * std::log(3.14159265358979323846 / 2.0) - 0.5 * c * c)
            .epsilon(1e-13));
  CHECK(chi_log_pdf(0.0, 3.0) == -kInf);
  const double mass =
      integrate_half_line([](double x) { return std::exp(chi_log_pdf(x, 3.0)); });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Bartlett prior") {
  SUBCASE("n = 1 reduces to the chi(1) density") {
    Eigen::MatrixXd L(1, 1);
    L << 0.9;
    CHECK(bartlett_log_prior(L) == doctest::Approx(chi_log_pdf(0.9, 1.0)).epsilon(1e-14));
  }
  SUBCASE("n = 2 sums the entry densities") {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
    L(0, 0) = 1.1;
    L(1, 0) = -0.4;
    L(1, 1) = 0.6;
    const double expected = chi_log_pdf(1.1, 2.0) + standard_normal_log_pdf(-0.4) +
                            chi_log_pdf(0.6, 1.0);
    CHECK(bartlett_log_prior(L) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("non-positive diagonal is out of support") {
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2, 2);
    L(1, 1) = 0.0;
    CHECK(bartlett_log_prior(L) == -kInf);
    L(1, 1) = -0.3;
    CHECK(bartlett_log_prior(L) == -kInf);
  }
}

TEST_CASE("gp_gaussian_logpost: m = 1 closed form, rho-independent") {
  GPDataset data;
  data.inputs = Eigen::MatrixXd::Constant(1, 1, 0.37);
  data.y = Eigen::VectorXd::Constant(1, 1.9);
  const double alpha = 1.2, sigma = 0.4;
  const double variance = alpha * alpha + sigma * sigma;
  const double expected = -0.5 * std::log(2.0 * 3.14159265358979323846) -
                          0.5 * std::log(variance) -
                          data.y[0] * data.y[0] / (2.0 * variance) +
                          half_cauchy_log_pdf(alpha, 3.0) + half_cauchy_log_pdf(0.8, 3.0) +
                          half_cauchy_log_pdf(sigma, 3.0);
  CHECK(gp_gaussian_logpost(alpha, 0.8, sigma, data) ==
        doctest::Approx(expected).epsilon(1e-12));
  // single point: the value cannot depend on the length scale beyond its prior
  const double base = gp_gaussian_logpost(alpha, 0.8, sigma, data) -
                      half_cauchy_log_pdf(0.8, 3.0);
  for (double rho : {0.1, 1.0, 7.0})
    CHECK(gp_gaussian_logpost(alpha, rho, sigma, data) - half_cauchy_log_pdf(rho, 3.0) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gp_gaussian_logpost: invariances and support") {
  RandomSource rng(5);
  GPDataset data = generate_synthetic_data(1, 12, rng);

  SUBCASE("translation of the inputs") {
    GPDataset shifted = data;
    shifted.inputs.array() += 17.25;
    CHECK(gp_gaussian_logpost(1.1, 0.9, 0.5, data) ==
          doctest::Approx(gp_gaussian_logpost(1.1, 0.9, 0.5, shifted)).epsilon(1e-10));
  }
  SUBCASE("simultaneous permutation of inputs and observations") {
    GPDataset permuted = data;
    for (int i = 0; i < data.count(); ++i) {
      const int j = data.count() - 1 - i;
      permuted.inputs(0, i) = data.inputs(0, j);
      permuted.y[i] = data.y[j];
    }
    CHECK(gp_gaussian_logpost(0.9, 1.4, 0.3, data) ==
          doctest::Approx(gp_gaussian_logpost(0.9, 1.4, 0.3, permuted)).epsilon(1e-11));
  }
  SUBCASE("out-of-support hyperparameters return -inf, never throw") {
    CHECK(gp_gaussian_logpost(-1.0, 1.0, 1.0, data) == -kInf);
    CHECK(gp_gaussian_logpost(1.0, 0.0, 1.0, data) == -kInf);
    CHECK(gp_gaussian_logpost(1.0, 1.0, -0.2, data) == -kInf);
  }
}

TEST_CASE("gp_gaussian_logpost: multivariate mode matches the scalar mode") {
  RandomSource rng(6);
  GPDataset data = generate_synthetic_data(1, 8, rng);
  const double rho = 1.3;
  Eigen::MatrixXd L(1, 1);
  L << 1.0 / rho;
  const double scalar = gp_gaussian_logpost(1.1, rho, 0.6, data);
  const double matrix = gp_gaussian_logpost(1.1, L, 0.6, data);
  // identical likelihood, different prior on the metric block
  const double scalar_likelihood = scalar - half_cauchy_log_pdf(rho, 3.0);
  const double matrix_likelihood = matrix - bartlett_log_prior(L);
  CHECK(scalar_likelihood == doctest::Approx(matrix_likelihood).epsilon(1e-12));
}

TEST_CASE("gp_nongaussian_logpost: zero whitened noise hits the data exactly") {
  RandomSource rng(7);
  GPDataset data = generate_synthetic_data(1, 6, rng);
  const double alpha = 1.0, rho = 0.9, sigma = 0.5;
  double expected = half_cauchy_log_pdf(alpha, 3.0) + half_cauchy_log_pdf(rho, 3.0) +
                    half_cauchy_log_pdf(sigma, 3.0);
  for (int i = 0; i < data.count(); ++i)
    expected += student_t_log_pdf(data.y[i], 2.0, sigma);
  CHECK(gp_nongaussian_logpost(alpha, rho, sigma, Eigen::VectorXd::Zero(6), data) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gp_nongaussian_logpost: whitening is a valid change of variables at m = 1") {
  GPDataset data;
  data.inputs = Eigen::MatrixXd::Constant(1, 1, -0.6);
  data.y = Eigen::VectorXd::Constant(1, 0.8);
  const double alpha = 1.1, rho = 0.7, sigma = 0.45;
  const double K = alpha * alpha;
  const double L = std::sqrt(K + 1e-10 * K);  // jittered factor used internally

  // integral over w of exp(logpost) with theta fixed
  const double from_w = integrate_real_line([&](double w) {
    Eigen::VectorXd wv(1);
    wv << w;
    return std::exp(gp_nongaussian_logpost(alpha, rho, sigma, wv, data));
  });
  // same marginal through the eps parameterization |K|^{-1/2} N-kernel
  const double prior = half_cauchy_log_pdf(alpha, 3.0) + half_cauchy_log_pdf(rho, 3.0) +
                       half_cauchy_log_pdf(sigma, 3.0);
  const double from_eps = integrate_real_line([&](double eps) {
    const double d = eps - data.y[0];
    return std::exp(-0.5 * d * d / (L * L) + prior +
                    student_t_log_pdf(eps, 2.0, sigma)) /
           L;
  });
  CHECK(from_w == doctest::Approx(from_eps).epsilon(1e-4));
}

TEST_CASE("gp_nongaussian_logpost: analytic w-gradient matches finite differences") {
  RandomSource rng(8);
  GPDataset data = generate_synthetic_data(1, 7, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = 0.4 + rng.uniform();
    const double rho = 0.4 + rng.uniform();
    const double sigma = 0.3 + rng.uniform();
    Eigen::VectorXd w(7);
    for (int i = 0; i < 7; ++i) w[i] = rng.normal();

    const Eigen::VectorXd grad = gp_nongaussian_grad_w(alpha, rho, sigma, w, data);
    const double h = 1e-5;
    for (int j = 0; j < 7; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (gp_nongaussian_logpost(alpha, rho, sigma, wp, data) -
                         gp_nongaussian_logpost(alpha, rho, sigma, wm, data)) /
                        (2.0 * h);
      CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("GPNonGaussianTarget caches the kernel factor consistently") {
  RandomSource rng(9);
  GPDataset data = generate_synthetic_data(1, 5, rng);
  const GPNonGaussianTarget target(data);
  Eigen::VectorXd x(8);
  x << 1.0, 0.8, 0.5, 0.1, -0.2, 0.3, -0.1, 0.05;
  const double first = target.log_unnorm(x);
  const double direct = gp_nongaussian_logpost(1.0, 0.8, 0.5, x.tail(5), data);
  CHECK(first == doctest::Approx(direct).epsilon(1e-14));
  // repeated evaluation through the cache gives the identical value
  CHECK(target.log_unnorm(x) == first);
  // different hyperparameters invalidate the cache
  Eigen::VectorXd x2 = x;
  x2[1] = 1.3;
  CHECK(target.log_unnorm(x2) ==
        doctest::Approx(gp_nongaussian_logpost(1.0, 1.3, 0.5, x.tail(5), data))
            .epsilon(1e-14));
}

TEST_CASE("synthetic data generation") {
  CHECK(f_true_scalar(0.0) == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(f_true(Eigen::VectorXd::Zero(3)) == doctest::Approx(1.4 * 1.4 * 1.4).epsilon(1e-14));

  SUBCASE("noise standard deviation in the inner region") {
    RandomSource rng(10);
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    int used = 0;
    for (int k = 0; k < draws; ++k) {
      const GPDataset d = generate_synthetic_data(1, 1, rng);
      const double x = d.inputs(0, 0);
      if (std::abs(x) >= 1.5) continue;
      const double noise = d.y[0] - f_true_scalar(x);
      sum += noise;
      sum2 += noise * noise;
      ++used;
    }
    const double std = std::sqrt(sum2 / used - (sum / used) * (sum / used));
    CHECK(std == doctest::Approx(0.125).epsilon(0.02));
  }

  SUBCASE("deterministic given the seed") {
    RandomSource a(42), b(42);
    const GPDataset da = generate_synthetic_data(2, 9, a);
    const GPDataset db = generate_synthetic_data(2, 9, b);
    CHECK((da.inputs - db.inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((da.y - db.y).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("CSV round trip") {
    RandomSource rng(11);
    const GPDataset d = generate_synthetic_data(3, 14, rng);
    std::stringstream ss;
    write_dataset_csv(d, ss);
    const GPDataset back = read_dataset_csv(ss);
    CHECK(back.dim() == 3);
    CHECK(back.count() == 14);
    CHECK((back.inputs - d.inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y - d.y).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("lower-triangular packing round trip") {
  RandomSource rng(12);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) L(i, j) = rng.normal();
  CHECK((unpack_lower_triangular(pack_lower_triangular(L), 3) - L).cwiseAbs().maxCoeff() ==
        0.0);
}
