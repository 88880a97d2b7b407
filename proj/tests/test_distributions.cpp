#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "srpc/distributions.hpp"
#include "srpc/errors.hpp"
#include "test_support.hpp"

using namespace srpc;
using namespace srpc::test;

namespace {

constexpr int kDraws = 100000;

// |mean - target| within three Monte Carlo standard errors.
void check_mean(const std::vector<double>& v, double target, double sd) {
  CHECK(std::abs(mean_of(v) - target) < 3.0 * sd / std::sqrt(static_cast<double>(v.size())));
}

}  // namespace

TEST_CASE("dirichlet coordinates follow their beta marginals") {
  Rng rng(1);
  std::vector<double> first;
  for (int t = 0; t < kDraws; ++t) first.push_back(sample_dirichlet(std::vector<double>{1.0, 1.0}, rng)[0]);
  check_mean(first, 0.5, std::sqrt(1.0 / 12.0));
  CHECK(variance_of(first) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("dirichlet with huge concentration sits at the centre") {
  Rng rng(2);
  const auto d = sample_dirichlet(std::vector<double>{1e9, 1e9}, rng);
  CHECK(std::abs(d[0] - 0.5) < 1e-3);
  CHECK(d[0] + d[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("dirichlet mean is alpha over its sum") {
  Rng rng(3);
  const std::vector<double> conc{2.0, 1.0, 1.0};
  std::vector<std::vector<double>> cols(3);
  for (int t = 0; t < kDraws; ++t) {
    const auto d = sample_dirichlet(conc, rng);
    for (int k = 0; k < 3; ++k) cols[k].push_back(d[k]);
  }
  const double a0 = 4.0;
  for (int k = 0; k < 3; ++k) {
    const double m = conc[k] / a0;
    check_mean(cols[k], m, std::sqrt(m * (1 - m) / (a0 + 1)));
  }
}

TEST_CASE("dirichlet rejects non-positive concentrations") {
  Rng rng(4);
  CHECK_THROWS_AS(sample_dirichlet(std::vector<double>{1.0, 0.0}, rng), BadConcentration);
  CHECK_THROWS_AS(sample_dirichlet(std::vector<double>{1.0, -2.0}, rng), BadConcentration);
}

TEST_CASE("categorical draws") {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) CHECK(sample_categorical(std::vector<double>{1.0, 0.0, 0.0}, rng) == 0);

  const std::vector<double> w{0.2, 0.3, 0.5};
  std::vector<double> counts(3, 0.0);
  for (int t = 0; t < kDraws; ++t) counts[sample_categorical(w, rng)] += 1.0;
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(w[k] * (1 - w[k]) / kDraws);
    CHECK(std::abs(counts[k] / kDraws - w[k]) < 3.0 * se);
  }

  std::vector<double> ones;
  for (int t = 0; t < kDraws; ++t) ones.push_back(sample_categorical(std::vector<double>{1.0, 1.0}, rng) == 0 ? 1.0 : 0.0);
  check_mean(ones, 0.5, 0.5);

  CHECK_THROWS_AS(sample_categorical(std::vector<double>{0.0, 0.0}, rng), DegenerateWeights);
  CHECK_THROWS_AS(sample_categorical(std::vector<double>{1.0, NAN}, rng), DegenerateWeights);
}

TEST_CASE("truncated normal at mean zero is half-normal") {
  Rng rng(6);
  std::vector<double> v;
  for (int t = 0; t < kDraws; ++t) v.push_back(sample_truncated_normal(0.0, true, rng));
  const double m = std::sqrt(2.0 / std::numbers::pi);
  check_mean(v, m, std::sqrt(1.0 - m * m));
}

TEST_CASE("truncated normal keeps its sign under extreme truncation") {
  Rng rng(7);
  for (int t = 0; t < 10000; ++t) {
    const double z = sample_truncated_normal(-20.0, true, rng);
    CHECK(z > 0.0);
    CHECK(std::isfinite(z));
    const double w = sample_truncated_normal(20.0, false, rng);
    CHECK(w <= 0.0);
    CHECK(std::isfinite(w));
  }
}

TEST_CASE("negative-side truncated normal mean matches quadrature") {
  // Oracle: integrate z * phi(z - 1) and phi(z - 1) over (-inf, 0].
  boost::math::quadrature::exp_sinh<double> integrator;
  auto density = [](double t) { return std::exp(-0.5 * (-t - 1.0) * (-t - 1.0)) / std::sqrt(2 * std::numbers::pi); };
  const double mass = integrator.integrate(density, 0.0, std::numeric_limits<double>::infinity());
  const double first = integrator.integrate([&](double t) { return -t * density(t); }, 0.0,
                                            std::numeric_limits<double>::infinity());
  const double second = integrator.integrate([&](double t) { return t * t * density(t); }, 0.0,
                                             std::numeric_limits<double>::infinity());
  const double m = first / mass;
  const double sd = std::sqrt(second / mass - m * m);

  Rng rng(8);
  std::vector<double> v;
  for (int t = 0; t < kDraws; ++t) v.push_back(sample_truncated_normal(1.0, false, rng));
  check_mean(v, m, sd);
}

TEST_CASE("mvn draws") {
  Rng rng(9);
  Eigen::VectorXd mu(2);
  mu << 1.5, -2.0;
  const Eigen::VectorXd exact = sample_mvn(mu, Eigen::MatrixXd::Zero(2, 2), rng);
  CHECK(exact[0] == 1.5);
  CHECK(exact[1] == -2.0);

  auto sample_cov = [&](const Eigen::MatrixXd& cov) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
    std::vector<Eigen::VectorXd> draws;
    for (int t = 0; t < kDraws; ++t) draws.push_back(sample_mvn(Eigen::VectorXd::Zero(2), cov, rng));
    for (const auto& d : draws) m += d;
    m /= kDraws;
    for (const auto& d : draws) acc += (d - m) * (d - m).transpose();
    return Eigen::MatrixXd(acc / (kDraws - 1));
  };
  const Eigen::MatrixXd id = sample_cov(Eigen::MatrixXd::Identity(2, 2));
  CHECK((id - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
  Eigen::MatrixXd cov(2, 2);
  cov << 2, 1, 1, 2;
  CHECK((sample_cov(cov) - cov).cwiseAbs().maxCoeff() < 0.05);

  CHECK_THROWS_AS(sample_mvn(mu, Eigen::MatrixXd::Identity(3, 3), rng), ShapeError);
}

TEST_CASE("mvn from precision form matches the covariance form") {
  Rng rng(10);
  Eigen::MatrixXd q(2, 2);
  q << 3, 1, 1, 2;
  Eigen::VectorXd b(2);
  b << 1, -1;
  Eigen::VectorXd mean;
  sample_mvn_canonical(q, b, rng, &mean);
  const Eigen::VectorXd expect = q.inverse() * b;
  CHECK((mean - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("beta and gamma moments") {
  Rng rng(11);
  std::vector<double> b, g1, g5;
  for (int t = 0; t < kDraws; ++t) {
    b.push_back(sample_beta(1.0, 1.0, rng));
    g1.push_back(sample_gamma(1.0, 1.0, rng));
    g5.push_back(sample_gamma(5.0, 2.0, rng));
  }
  check_mean(b, 0.5, std::sqrt(1.0 / 12.0));
  check_mean(g1, 1.0, 1.0);
  CHECK(std::abs(variance_of(g1) - 1.0) < 0.03);
  check_mean(g5, 2.5, std::sqrt(5.0) / 2.0);
  CHECK_THROWS_AS(sample_gamma(0.0, 1.0, rng), BadParameter);
  CHECK_THROWS_AS(sample_beta(1.0, -1.0, rng), BadParameter);
}

TEST_CASE("normal cdf") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  CHECK(std::abs(std_normal_cdf(1.96) - 0.9750) < 1e-4);
  boost::math::quadrature::exp_sinh<double> integrator;
  const double tail = integrator.integrate(
      [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi); }, 6.0,
      std::numeric_limits<double>::infinity());
  CHECK(std::abs(std_normal_cdf(-6.0) - tail) / tail < 1e-12);
  CHECK(log_std_normal_cdf(-40.0) < -800.0);
  CHECK(std::isfinite(log_std_normal_cdf(-40.0)));
  CHECK(std_normal_quantile(std_normal_cdf(0.7)) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("seeded streams are reproducible and distinct") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  for (int t = 0; t < 10; ++t) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
}
