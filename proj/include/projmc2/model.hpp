#pragma once

#include "projmc2/linalg.hpp"
#include "projmc2/nngp.hpp"
#include "projmc2/random.hpp"
#include "projmc2/spatial.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace projmc2::model {

/// Covariates, outcomes and sites of one analysis. X must have full column
/// rank and fewer columns than rows.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, spatial::LocationSet locs);

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& y() const { return y_; }
  const spatial::LocationSet& locs() const { return locs_; }

  Eigen::Index n() const { return y_.rows(); }
  Eigen::Index p() const { return x_.cols(); }
  Eigen::Index q() const { return y_.cols(); }

  /// First column of X that is identically one, if any.
  std::optional<Eigen::Index> intercept_column() const { return intercept_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd y_;
  spatial::LocationSet locs_;
  std::optional<Eigen::Index> intercept_;
};

/// Matrix-normal prior on the rows of a coefficient block, MN(mean, row_cov, Σ).
struct MatrixNormalPrior {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd row_cov;
};

struct PriorSpec {
  std::optional<MatrixNormalPrior> beta;    // nullopt: flat
  std::optional<MatrixNormalPrior> lambda;  // nullopt: flat
  double a = 2.0;
  Eigen::VectorXd b;                        // length q
  std::vector<spatial::Kernel> kernels;     // one per factor, fixed for the run
  std::size_t m = nngp::kDefaultNeighbors;

  std::size_t num_factors() const { return kernels.size(); }
  void validate(Eigen::Index p, Eigen::Index q) const;
};

/// Inverse-Wishart part of a full-covariance MNIW prior. Test oracle only.
struct InverseWishartPrior {
  Eigen::MatrixXd psi;
  double nu = 0.0;
};

struct ModelState {
  Eigen::MatrixXd beta;     // p × q
  Eigen::MatrixXd lambda;   // K × q
  Eigen::VectorXd sigma2;   // q
  Eigen::MatrixXd f_tilde;  // n × K
};

/// Parameters of (γ, σ²) | F, Y with diagonal Σ.
struct MNIWCondParams {
  Eigen::MatrixXd mu_star;        // (p + K) × q
  Eigen::MatrixXd chol_vstar_inv; // lower L with L Lᵀ = X*ᵀX*
  Eigen::VectorXd b_star;
  double a_star = 0.0;
  Eigen::Index p = 0;

  Eigen::MatrixXd v_star() const;
};

struct FullMNIWParams {
  Eigen::MatrixXd mu_star;
  Eigen::MatrixXd v_star;
  Eigen::MatrixXd psi_star;
  double nu_star = 0.0;
};

/// √n · Q of the thin QR of the column-centered input.
Eigen::MatrixXd project_g(const Eigen::MatrixXd& f, bool reorthogonalize = false);

/// Whitened least-squares system whose solution distribution is vec(F) | γ, Σ, Y.
/// Rows: n·q likelihood rows (outcome-major) followed by n·K prior rows.
/// Columns: vec(F), factor-major.
struct FactorSystem {
  linalg::LinearOperator op;
  Eigen::VectorXd rhs;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
};

FactorSystem build_factor_system(const ModelState& state, const Dataset& data,
                                 const std::vector<nngp::NNGPFactor>& factors);

struct FactorDrawOptions {
  linalg::LsmrOptions lsmr;
  bool zero_noise = false;  // returns the conditional mean
};

struct FactorDraw {
  Eigen::MatrixXd f;  // n × K
  linalg::LsmrResult solve;
};

/// Draws vec(F) by solving X̃ x = Ỹ + v with v ~ N(0, I) over all rows.
FactorDraw sample_F(const FactorSystem& system, Rng& rng, const FactorDrawOptions& opts = {},
                    const Eigen::MatrixXd* warm_start = nullptr);

MNIWCondParams conditional_mniw_params(const Eigen::MatrixXd& f_tilde, const Dataset& data, const PriorSpec& priors);

Eigen::VectorXd sample_sigma2(const MNIWCondParams& params, Rng& rng);

struct GammaDraw {
  Eigen::MatrixXd beta;
  Eigen::MatrixXd lambda;
};

/// γ = μ* + L*⁻ᵀ U with u_ij ~ N(0, σ_j²). zero_noise returns μ*.
GammaDraw sample_gamma(const MNIWCondParams& params, const Eigen::VectorXd& sigma2, Rng& rng,
                       bool zero_noise = false);

/// Dense full-Σ conditional (μ*, V*, Ψ*, ν*). For validating the diagonal path on small n.
FullMNIWParams conditional_mniw_full_sigma_oracle(const Eigen::MatrixXd& f, const Dataset& data,
                                                  const PriorSpec& priors, const InverseWishartPrior& iw);

}  // namespace projmc2::model
