#include "oracles.hpp"

#include "projmc2/simgen.hpp"

#include <doctest.h>

using namespace projmc2;

TEST_CASE("default simulation values") {
  const auto s = simgen::default_spec();
  CHECK(s.true_beta(0, 0) == 1.0);
  CHECK(s.true_beta(1, 8) == 5.0);
  CHECK(s.true_lambda(0, 6) == -0.94);
  CHECK(s.true_lambda(1, 7) == 0.92);
  CHECK(s.true_sigma2[6] == 3.5);
  CHECK(s.prior_phi == Eigen::Vector2d(4.0, 6.0));
  CHECK(s.true_phi == Eigen::Vector2d(6.0, 9.0));
  CHECK(s.n == 2000);
  CHECK(s.q == 10);
  CHECK(s.p == 2);
  CHECK(s.k == 2);
}

TEST_CASE("sensitivity cases") {
  const auto cases = simgen::sensitivity_specs();
  REQUIRE(cases.size() == 3);
  CHECK(cases[0].spec.prior_phi == Eigen::Vector2d(6.0, 9.0));
  CHECK(cases[1].spec.prior_phi == Eigen::Vector2d(9.0, 3.0));
  CHECK(cases[2].spec.prior_phi == Eigen::Vector2d(18.0, 18.0));
  for (const auto& c : cases) CHECK(c.spec.true_phi == Eigen::Vector2d(6.0, 9.0));

  auto spec = cases[1].spec;
  spec.n = 20;
  const auto sim = simgen::simulate(spec);
  const auto init = simgen::sensitivity_initial_state(cases[1], sim.truth);
  CHECK(init.lambda.row(0) == sim.truth.lambda.row(1));
  CHECK(init.lambda.row(1) == sim.truth.lambda.row(0));
  CHECK(init.beta == sim.truth.beta);
  CHECK(init.sigma2 == sim.truth.sigma2);
}

TEST_CASE("simulated noise has the configured variances") {
  const auto spec = simgen::default_spec();
  const auto sim = simgen::simulate(spec);
  const Eigen::MatrixXd e = sim.data.y() - sim.data.x() * sim.truth.beta - sim.truth.f * sim.truth.lambda;
  for (Eigen::Index j = 0; j < 10; ++j) {
    const double var = (e.col(j).array() - e.col(j).mean()).square().sum() / 1999.0;
    CHECK(std::abs(var - spec.true_sigma2[j]) / spec.true_sigma2[j] < 0.15);
  }
  CHECK((sim.data.x().col(0).array() == 1.0).all());
  CHECK(sim.data.locs().coords().minCoeff() >= 0.0);
  CHECK(sim.data.locs().coords().maxCoeff() <= 1.0);

  const auto again = simgen::simulate(spec);
  CHECK(again.data.y() == sim.data.y());
  CHECK(again.data.locs().coords() == sim.data.locs().coords());
}

TEST_CASE("zero signal gives independent outcome columns") {
  auto spec = simgen::default_spec();
  spec.n = 1000;
  spec.true_beta.setZero();
  spec.true_lambda.setZero();
  const auto sim = simgen::simulate(spec);
  const Eigen::MatrixXd y = sim.data.y().rowwise() - sim.data.y().colwise().mean();
  const Eigen::MatrixXd cov = y.transpose() * y;
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < i; ++j) CHECK(std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j))) < 0.1);
}

TEST_CASE("dense covariance agrees with an independent construction") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd s = oracle::uniform_sites(50, rng);
  CHECK((simgen::exponential_covariance(s, 6.0) - oracle::dense_cov(s, 6.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("factor variogram at half distance") {
  auto spec = simgen::default_spec();
  spec.n = 1200;
  std::vector<double> est;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    spec.seed = seed;
    const auto sim = simgen::simulate(spec);
    const Eigen::MatrixXd& s = sim.data.locs().coords();
    const Eigen::VectorXd f = sim.truth.f.col(0);
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        if (std::abs((s.row(i) - s.row(j)).norm() - 0.5) < 0.02) {
          num += 0.5 * (f[i] - f[j]) * (f[i] - f[j]);
          den += 1.0;
        }
      }
    }
    est.push_back(num / den);
  }
  const Eigen::Map<const Eigen::VectorXd> e(est.data(), static_cast<Eigen::Index>(est.size()));
  const double mean = e.mean();
  const double se = std::sqrt((e.array() - mean).square().sum() / (e.size() - 1) / e.size());
  CHECK(std::abs(mean - (1.0 - std::exp(-3.0))) < 3.0 * se);
}
