#pragma once

#include "projmc2/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace projmc2::simgen {

/// Generating truth plus the decays used at fit time. Sites are uniform on
/// the unit square.
struct SimSpec {
  std::size_t n = 2000;
  std::size_t q = 10;
  std::size_t p = 2;
  std::size_t k = 2;
  Eigen::MatrixXd true_beta;    // p × q
  Eigen::MatrixXd true_lambda;  // K × q
  Eigen::VectorXd true_sigma2;  // q
  Eigen::VectorXd true_phi;     // K
  Eigen::VectorXd prior_phi;    // K
  std::uint64_t seed = 2024;

  void validate() const;
};

struct Truth {
  Eigen::MatrixXd f;  // n × K, uncentered
  Eigen::MatrixXd beta;
  Eigen::MatrixXd lambda;
  Eigen::VectorXd sigma2;
  Eigen::VectorXd phi;
};

struct Simulation {
  model::Dataset data;
  Truth truth;
};

/// Ten outcomes, intercept plus one covariate, two factors with decays 6 and
/// 9, fitted with decays 4 and 6.
SimSpec default_spec();

/// X = [1, z] with z standard normal, each factor an exact exponential GP
/// (dense Cholesky), Y = Xβ + FΛ + independent N(0, σ_j²) noise.
Simulation simulate(const SimSpec& spec);

/// Dense correlation matrix exp(−φ‖s_i − s_j‖).
Eigen::MatrixXd exponential_covariance(const Eigen::MatrixXd& coords, double phi);

struct SensitivityCase {
  std::string name;
  SimSpec spec;
  std::vector<std::size_t> lambda_row_order;  // initial Λ = truth rows in this order
};

/// Tests 1-3: prior decays (6, 9), (9, 3) and (18, 18) on the default truth.
std::vector<SensitivityCase> sensitivity_specs();

/// β and σ² at truth, Λ at truth with rows permuted, F at zero.
model::ModelState sensitivity_initial_state(const SensitivityCase& test, const Truth& truth);

}  // namespace projmc2::simgen
