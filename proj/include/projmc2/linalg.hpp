#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

namespace projmc2::linalg {

/// Matrix-free linear map R^ncols -> R^nrows with its adjoint. Both callbacks
/// write into a preallocated output of the right length.
struct LinearOperator {
  using Apply = std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)>;

  Eigen::Index nrows = 0;
  Eigen::Index ncols = 0;
  Apply forward;
  Apply adjoint;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const;

  static LinearOperator from_dense(const Eigen::MatrixXd& a);
};

enum class LsmrStop {
  ZeroSolution,        // rhs is zero or already in the null space of Aᵀ
  Compatible,          // ‖r‖ small: consistent system solved
  LeastSquares,        // ‖Aᵀr‖ small: least-squares solution
  ConditionLimit,
  CompatibleEps,       // the two tests above hit machine precision
  LeastSquaresEps,
  ConditionLimitEps,
  IterationLimit,
};

std::string_view to_string(LsmrStop stop);

struct LsmrOptions {
  double atol = 1e-8;
  double btol = 1e-8;
  /// 0 means 4·ncols.
  Eigen::Index max_iter = 0;
};

struct LsmrResult {
  Eigen::VectorXd x;
  Eigen::Index iterations = 0;
  LsmrStop stop = LsmrStop::ZeroSolution;
  double norm_r = 0.0;
  double norm_ar = 0.0;

  bool hit_iteration_limit() const { return stop == LsmrStop::IterationLimit; }
};

/// Called after every iteration with the iteration count and current iterate.
using LsmrObserver = std::function<void(Eigen::Index, const Eigen::VectorXd&)>;

/// LSMR (Fong & Saunders) for min ‖op·x − rhs‖. Never forms opᵀop.
/// An optional starting point solves for the correction from x0.
LsmrResult lsmr(const LinearOperator& op, const Eigen::VectorXd& rhs, const LsmrOptions& opts = {},
                const Eigen::VectorXd* x0 = nullptr, const LsmrObserver& observer = {});

struct QRResult {
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
};

/// Thin QR by modified Gram–Schmidt; r has a strictly positive diagonal.
/// Throws when a column's residual falls below 1e-12 of the largest input
/// column norm.
QRResult mgs_thin_qr(const Eigen::MatrixXd& mat, bool reorthogonalize = false);

struct SvdResult {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
};

/// Rank-`rank` randomized SVD with Gaussian sketching and power iterations.
SvdResult randomized_svd(const Eigen::MatrixXd& mat, Eigen::Index rank, Eigen::Index oversample = 10,
                         Eigen::Index power_iters = 2, std::uint64_t seed = 0);

}  // namespace projmc2::linalg
