#include "projmc2/simgen.hpp"

#include "projmc2/error.hpp"
#include "projmc2/random.hpp"

#include <cmath>

namespace projmc2::simgen {

void SimSpec::validate() const {
  const auto rows = [](const auto& m) { return static_cast<std::size_t>(m.rows()); };
  const auto cols = [](const auto& m) { return static_cast<std::size_t>(m.cols()); };
  if (n < 2 || q < 1 || p < 1 || k < 1) throw Error(ErrorCode::Config, "n, q, p and K must be positive (n >= 2)");
  if (rows(true_beta) != p || cols(true_beta) != q) throw Error(ErrorCode::Config, "true_beta must be p x q");
  if (rows(true_lambda) != k || cols(true_lambda) != q) throw Error(ErrorCode::Config, "true_lambda must be K x q");
  if (rows(true_sigma2) != q) throw Error(ErrorCode::Config, "true_sigma2 must have length q");
  if (rows(true_phi) != k) throw Error(ErrorCode::Config, "true_phi must have length K");
  if (rows(prior_phi) != k) throw Error(ErrorCode::Config, "prior_phi must have length K");
  if (!(true_sigma2.array() > 0.0).all()) throw Error(ErrorCode::Config, "true_sigma2 must be positive");
  if (!(true_phi.array() > 0.0).all() || !(prior_phi.array() > 0.0).all()) {
    throw Error(ErrorCode::Config, "decays must be positive");
  }
}

SimSpec default_spec() {
  SimSpec s;
  s.true_beta.resize(2, 10);
  s.true_beta << 1.0, -1.0, 1.0, -0.5, 2.0, -1.5, 0.5, 0.3, -2.0, 1.5,
                 -3.0, 2.0, 2.0, -1.0, -4.0, 3.0, 4.0, -2.5, 5.0, -3.0;
  s.true_lambda.resize(2, 10);
  s.true_lambda << 0.81, 0.49, -0.49, -0.15, -0.8, 0.38, -0.94, 0.86, 0.16, -0.76,
                   -0.11, 0.02, -0.33, 0.74, -0.75, -0.73, -0.3, 0.92, -0.38, -0.59;
  s.true_sigma2.resize(10);
  s.true_sigma2 << 0.5, 1.0, 0.4, 2.0, 0.3, 2.5, 3.5, 0.45, 1.5, 0.5;
  s.true_phi = Eigen::Vector2d(6.0, 9.0);
  s.prior_phi = Eigen::Vector2d(4.0, 6.0);
  return s;
}

Eigen::MatrixXd exponential_covariance(const Eigen::MatrixXd& coords, double phi) {
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) c(i, j) = c(j, i) = std::exp(-phi * (coords.row(i) - coords.row(j)).norm());
  }
  return c;
}

Simulation simulate(const SimSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto k = static_cast<Eigen::Index>(spec.k);
  const auto q = static_cast<Eigen::Index>(spec.q);
  std::normal_distribution<double> normal;

  Rng rng_loc = make_stream(spec.seed, Stream::Locations);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd coords(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    coords(i, 0) = unit(rng_loc);
    coords(i, 1) = unit(rng_loc);
  }

  Rng rng_x = make_stream(spec.seed, Stream::Covariates);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, static_cast<Eigen::Index>(spec.p));
  for (Eigen::Index c = 1; c < x.cols(); ++c)
    for (Eigen::Index i = 0; i < n; ++i) x(i, c) = normal(rng_x);

  Rng rng_f = make_stream(spec.seed, Stream::Factors);
  Eigen::MatrixXd f(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::MatrixXd cov = exponential_covariance(coords, spec.true_phi[j]);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      cov.diagonal().array() += 1e-10;
      llt.compute(cov);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::Numerical, "dense GP Cholesky failed for factor " + std::to_string(j + 1));
      }
    }
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng_f);
    f.col(j) = llt.matrixL() * z;
  }

  Rng rng_e = make_stream(spec.seed, Stream::Noise);
  Eigen::MatrixXd noise(n, q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const double sd = std::sqrt(spec.true_sigma2[c]);
    for (Eigen::Index i = 0; i < n; ++i) noise(i, c) = sd * normal(rng_e);
  }

  Eigen::MatrixXd y = x * spec.true_beta + f * spec.true_lambda + noise;
  Truth truth{f, spec.true_beta, spec.true_lambda, spec.true_sigma2, spec.true_phi};
  return {model::Dataset(std::move(x), std::move(y), spatial::LocationSet(std::move(coords))), std::move(truth)};
}

std::vector<SensitivityCase> sensitivity_specs() {
  std::vector<SensitivityCase> out;
  const std::pair<const char*, Eigen::Vector2d> tests[] = {
      {"test1", Eigen::Vector2d(6.0, 9.0)},
      {"test2", Eigen::Vector2d(9.0, 3.0)},
      {"test3", Eigen::Vector2d(18.0, 18.0)},
  };
  for (const auto& [name, phi] : tests) {
    SensitivityCase c;
    c.name = name;
    c.spec = default_spec();
    c.spec.prior_phi = phi;
    c.lambda_row_order = {1, 0};
    out.push_back(std::move(c));
  }
  return out;
}

model::ModelState sensitivity_initial_state(const SensitivityCase& test, const Truth& truth) {
  if (test.lambda_row_order.size() != static_cast<std::size_t>(truth.lambda.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "row order does not match K");
  }
  model::ModelState s;
  s.beta = truth.beta;
  s.sigma2 = truth.sigma2;
  s.lambda.resize(truth.lambda.rows(), truth.lambda.cols());
  for (std::size_t r = 0; r < test.lambda_row_order.size(); ++r)
    s.lambda.row(static_cast<Eigen::Index>(r)) = truth.lambda.row(static_cast<Eigen::Index>(test.lambda_row_order[r]));
  s.f_tilde = Eigen::MatrixXd::Zero(truth.f.rows(), truth.f.cols());
  return s;
}

}  // namespace projmc2::simgen
