#pragma once

#include "projmc2/linalg.hpp"
#include "projmc2/model.hpp"
#include "projmc2/nngp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace projmc2::sampler {

enum class Algorithm { ProjMC2, Gibbs, GibbsPost };

std::string_view to_string(Algorithm algorithm);
/// Accepts "ProjMC2", "Gibbs", "GibbsPost".
Algorithm parse_algorithm(std::string_view name);

struct RunConfig {
  std::size_t iterations = 20000;
  std::size_t warmup = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  std::uint32_t chain = 0;  // substream index when several chains share a seed
  Algorithm algorithm = Algorithm::ProjMC2;
  std::size_t k = 2;
  linalg::LsmrOptions lsmr;

  void validate() const;
  std::size_t retained() const { return (iterations - warmup) / thin; }
};

/// Draws of one parameter block: draws × rows × cols, row-major per draw.
struct Block {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Block() = default;
  Block(std::string name, std::size_t draws, std::size_t rows, std::size_t cols);

  std::size_t draws() const { return rows * cols == 0 ? 0 : data.size() / (rows * cols); }
  std::size_t stride() const { return rows * cols; }

  Eigen::MatrixXd get(std::size_t draw) const;
  void set(std::size_t draw, const Eigen::MatrixXd& value);
  /// Trace of entry (r, c) across draws.
  Eigen::VectorXd series(std::size_t r, std::size_t c) const;
};

struct ChainStore {
  RunConfig config;
  Algorithm algorithm = Algorithm::ProjMC2;  // GibbsPost after post_center
  double wall_seconds = 0.0;
  std::size_t lsmr_warnings = 0;
  std::optional<std::size_t> intercept_row;

  Block ftilde;  // F̃ for ProjMC², raw F for the Gibbs variants
  Block beta;
  Block lambda;
  Block sigma2;  // rows = q, cols = 1

  std::size_t draws() const { return beta.draws(); }
  std::vector<Block*> blocks() { return {&ftilde, &beta, &lambda, &sigma2}; }
  std::vector<const Block*> blocks() const { return {&ftilde, &beta, &lambda, &sigma2}; }
};

struct IterationInfo {
  std::size_t iteration = 0;
  Eigen::Index lsmr_iterations = 0;
  linalg::LsmrStop lsmr_stop = linalg::LsmrStop::ZeroSolution;
  double seconds = 0.0;
};

using IterationCallback = std::function<void(const IterationInfo&)>;

/// OLS β, rank-K randomized SVD of the regression residuals for (F, Λ) with
/// F = U·S, and σ² from the column variances of those residuals. Factors come
/// out in decreasing singular-value order. The samplers use F only as the
/// first LSMR starting point.
model::ModelState initialize_state(const model::Dataset& data, std::size_t k, std::uint64_t seed);

/// One NNGP factor per prior kernel, on a shared maximin ordering and
/// neighbor sets with m = priors.m.
std::vector<nngp::NNGPFactor> build_factors(const model::Dataset& data, const model::PriorSpec& priors,
                                            unsigned workers = 1);

/// `init` overrides the default initialization when given.
ChainStore run_projmc2(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                       const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init = nullptr,
                       const IterationCallback& on_iteration = {});

ChainStore run_blocked_gibbs(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                             const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init = nullptr,
                             const IterationCallback& on_iteration = {});

/// Dispatches on cfg.algorithm; GibbsPost runs blocked Gibbs then post_center.
ChainStore run(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
               const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init = nullptr,
               const IterationCallback& on_iteration = {});

/// Centers each raw F column per draw and moves Λᵀf̄ into the intercept row
/// of β, leaving Xβ + FΛ unchanged.
ChainStore post_center(const ChainStore& chains);

}  // namespace projmc2::sampler
