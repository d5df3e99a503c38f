#include <cmath>
#include <random>
#include <vector>

#include "aucil/gaussian.hpp"
#include "aucil/synthetic.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace aucil;
using testsup::random_spd;
using testsup::random_positive_vector;
using testsup::random_vector;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

TEST_CASE("log_density at the mean with identity covariance") {
  Vector mu2 = Vector::Zero(2);
  const Covariance i2 = Covariance::diagonal(Vector::Ones(2));
  CHECK(log_density(mu2, mu2, i2) == doctest::Approx(-kLog2Pi).epsilon(1e-12));

  Vector mu17 = Vector::Constant(17, 0.25);
  const Covariance i17 = Covariance::full(Matrix::Identity(17, 17));
  CHECK(log_density(mu17, mu17, i17) == doctest::Approx(-8.5 * kLog2Pi).epsilon(1e-12));
  CHECK(log_density(mu17, mu17, i17) == doctest::Approx(-15.6219551).epsilon(1e-7));
}

TEST_CASE("log_density matches the naive inverse/determinant oracle") {
  std::mt19937_64 rng(42);

  // The single 5-dimensional spot check.
  {
    const Matrix spd = random_spd(rng, 5);
    const Vector mean = random_vector(rng, 5);
    const Vector x = random_vector(rng, 5, 2.0);
    const double got = log_density(x, mean, Covariance::full(spd));
    const double want = naive_mvn_log_density(x, mean, spd);
    CHECK(std::abs(got - want) <= 1e-8);
  }

  // Property: 120 random instances, dims 2..17, both covariance kinds.
  for (int trial = 0; trial < 120; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 16);
    const Vector mean = random_vector(rng, dim);
    const Vector x = random_vector(rng, dim, 2.0);
    if (trial % 2 == 0) {
      const Matrix spd = random_spd(rng, dim);
      const double got = log_density(x, mean, Covariance::full(spd));
      CHECK(std::abs(got - naive_mvn_log_density(x, mean, spd)) <= 1e-8);
    } else {
      const Vector var = random_positive_vector(rng, dim);
      const double got = log_density(x, mean, Covariance::diagonal(var));
      const Matrix dense = var.asDiagonal();
      CHECK(std::abs(got - naive_mvn_log_density(x, mean, dense)) <= 1e-8);
    }
  }
}

TEST_CASE("log_density is maximized at the mean") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 8);
    const Vector mean = random_vector(rng, dim);
    const Matrix spd = random_spd(rng, dim);
    const Covariance cov = Covariance::full(spd);
    Vector delta = random_vector(rng, dim, 0.5);
    if (delta.norm() == 0.0) delta[0] = 0.1;
    CHECK(log_density(mean, mean, cov) >= log_density(mean + delta, mean, cov));
  }
}

TEST_CASE("diagonal and full kinds agree when the full matrix is diagonal") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 17);
    const Vector var = random_positive_vector(rng, dim);
    const Vector mean = random_vector(rng, dim);
    const Vector x = random_vector(rng, dim, 1.5);
    const double via_diag = log_density(x, mean, Covariance::diagonal(var));
    const double via_full = log_density(x, mean, Covariance::full(Matrix(var.asDiagonal())));
    CHECK(std::abs(via_diag - via_full) <= 1e-10);
  }
}

TEST_CASE("regularize") {
  const Covariance id2 = Covariance::diagonal(Vector::Ones(2));
  const Covariance same = id2.regularized(0.0);
  CHECK(same.diag() == id2.diag());
  CHECK(same.regularization() == 0.0);

  const Covariance zero2 = Covariance::diagonal(Vector::Zero(2));
  const Covariance fixed = zero2.regularized(1e-6);
  CHECK(fixed.diag()[0] == doctest::Approx(1e-6));
  CHECK(fixed.regularization() == doctest::Approx(1e-6));
  const GaussianEvaluator eval(Vector::Zero(2), fixed);  // factorization succeeds
  CHECK(eval.log_det() == doctest::Approx(2.0 * std::log(1e-6)).epsilon(1e-12));

  const Covariance zero17 = Covariance::full(Matrix::Zero(17, 17)).regularized(1e-6);
  const GaussianEvaluator eval17(Vector::Zero(17), zero17);
  CHECK(eval17.log_det() == doctest::Approx(17.0 * std::log(1e-6)).epsilon(1e-10));
}

TEST_CASE("ensure_factorizable retries once and then reports the component") {
  // Zero covariance: fails raw, succeeds regularized.
  const Covariance zero = Covariance::diagonal(Vector::Zero(3));
  const Covariance fixed = ensure_factorizable(zero, 1e-6);
  CHECK(fixed.regularization() == doctest::Approx(1e-6));

  // Indefinite matrix: regularization at 1e-6 cannot rescue it.
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(ensure_factorizable(Covariance::full(indefinite), 1e-6, "component 3"),
                  SingularCovarianceError);
  try {
    ensure_factorizable(Covariance::full(indefinite), 1e-6, "component 3");
  } catch (const SingularCovarianceError& e) {
    CHECK(std::string(e.what()).find("component 3") != std::string::npos);
  }
}

TEST_CASE("log_density input contracts") {
  const Covariance i2 = Covariance::diagonal(Vector::Ones(2));
  CHECK_THROWS_AS(log_density(Vector::Zero(3), Vector::Zero(2), i2), ContractViolation);
  CHECK_THROWS_AS(log_density(Vector::Zero(2), Vector::Zero(3), i2), ContractViolation);
  CHECK_THROWS_AS(Covariance::full(Matrix::Ones(2, 3)), ContractViolation);

  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(Covariance::full(asym), ContractViolation);
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> half{std::log(0.5), std::log(0.5)};
  CHECK(log_sum_exp(half) == doctest::Approx(0.0).epsilon(1e-15));

  for (double a : {-3.25, 0.0, 12.5, 699.0}) {
    const std::vector<double> one{a};
    CHECK(log_sum_exp(one) == a);  // exact for a single term
  }

  // Shift far outside double's exp range; long-double reference.
  const std::vector<double> deep{-1000.0, -1000.0};
  const long double expect =
      -1000.0L + std::log(2.0L);
  CHECK(log_sum_exp(deep) == doctest::Approx(static_cast<double>(expect)).epsilon(1e-14));

  // Shift invariance within 1e-12.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<double> terms;
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int i = 0; i < n; ++i) terms.push_back(u(rng));
    const double base = log_sum_exp(terms);
    const double shift = u(rng);
    std::vector<double> shifted = terms;
    for (double& t : shifted) t += shift;
    CHECK(std::abs(log_sum_exp(shifted) - (base + shift)) <= 1e-12);
  }

  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), ContractViolation);
  const std::vector<double> with_nan{0.0, std::nan("")};
  CHECK_THROWS_AS(log_sum_exp(with_nan), ContractViolation);
}

TEST_CASE("batch and single-point densities agree") {
  std::mt19937_64 rng(23);
  const int dim = 6;
  const Vector mean = random_vector(rng, dim);
  const Matrix spd = random_spd(rng, dim);
  const GaussianEvaluator eval(mean, Covariance::full(spd));
  Matrix rows(5, dim);
  for (int i = 0; i < 5; ++i) rows.row(i) = random_vector(rng, dim, 2.0).transpose();
  const Vector batch = eval.log_density_batch(rows);
  for (int i = 0; i < 5; ++i) {
    CHECK(batch[i] == doctest::Approx(eval.log_density(rows.row(i))).epsilon(1e-12));
  }
}
