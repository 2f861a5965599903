#pragma once

#include "projmc2/sampler.hpp"
#include "projmc2/spatial.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace projmc2::diagnostics {

/// ESS by Geyer's initial monotone positive sequence on the biased empirical
/// autocovariances. Constant chains return their length; antithetic chains
/// are capped at 1.5 × length. Needs at least 10 draws.
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& chain);

/// Flips rows of Λ (and the matching F̃ columns) draw by draw so each row
/// points along its posterior mean row. One pass.
sampler::ChainStore align_signs(const sampler::ChainStore& chains);

struct SphericalSummary {
  Eigen::VectorXd mean_direction;
  double r_bar = 0.0;
  double spherical_variance = 0.0;
};

/// Samples are columns; each is normalized before averaging.
SphericalSummary spherical_summary(const Eigen::MatrixXd& samples);
SphericalSummary spherical_summary(const std::vector<Eigen::VectorXd>& samples);

enum class RecoveryMode { Sphere, Stiefel };

struct FactorMetric {
  double euclidean_distance = 0.0;
  double spherical_variance = 0.0;
};

/// Per-factor distance between the posterior mean direction and the
/// normalized truth, plus the spherical variance of the posterior columns.
/// The distance is taken up to a global sign of the true column.
std::vector<FactorMetric> factor_recovery_metrics(const Eigen::MatrixXd& true_f, const sampler::ChainStore& chains,
                                                  RecoveryMode mode);

struct BlockESS {
  std::string block;
  std::size_t count = 0;
  double min = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double frac_below_100 = 0.0;
};

struct ESSReport {
  std::vector<BlockESS> blocks;

  const BlockESS& at(const std::string& name) const;
};

/// Known blocks: beta0 (intercept row), beta1 (other rows of β), beta, lambda,
/// f, sigma2.
ESSReport ess_report(const sampler::ChainStore& chains, const std::vector<std::string>& blocks);

/// Per-draw ESS of every scalar in a block, in row-major entry order.
std::vector<double> block_ess(const sampler::ChainStore& chains, const std::string& block);

/// Pearson correlation of (v_i, v_j) over all pairs with j among the k
/// nearest neighbors of i. Larger means spatially smoother.
double neighbor_correlation(const Eigen::VectorXd& values, const std::vector<std::vector<std::size_t>>& neighbors);

/// Posterior mean of each F̃ column.
Eigen::MatrixXd posterior_mean_factors(const sampler::ChainStore& chains);

void write_ess_csv(const std::filesystem::path& path, const ESSReport& report);
void write_factor_metrics_csv(const std::filesystem::path& path, const std::vector<FactorMetric>& metrics,
                              RecoveryMode mode);
/// Long format `iteration,parameter,value` for β, Λ and σ².
void write_traces_csv(const std::filesystem::path& path, const sampler::ChainStore& chains);

}  // namespace projmc2::diagnostics
