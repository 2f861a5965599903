#pragma once

#include "projmc2/spatial.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace projmc2::nngp {

inline constexpr std::size_t kDefaultNeighbors = 15;
inline constexpr std::size_t kMaxNeighbors = 20;

/// Sparse Vecchia factor of one correlation matrix: C⁻¹ ≈ (I − A)ᵀ D⁻¹ (I − A)
/// in maximin order. A is stored row-compressed and strictly lower
/// triangular in ordered positions.
///
/// Vectors passed to the apply functions are indexed by original site; the
/// whitened side is indexed by ordered position.
class NNGPFactor {
 public:
  std::size_t size() const { return d_diag_.size(); }
  std::size_t nonzeros() const { return col_.size(); }

  /// Row i of A as (ordered column position, coefficient) ranges.
  std::size_t row_begin(std::size_t i) const { return row_ptr_[i]; }
  std::size_t row_end(std::size_t i) const { return row_ptr_[i + 1]; }
  std::size_t col(std::size_t k) const { return col_[k]; }
  double coef(std::size_t k) const { return coef_[k]; }

  const std::vector<double>& d_diag() const { return d_diag_; }
  const spatial::Ordering& ordering() const { return ordering_; }

  /// D^{-1/2}(I − A) P v, where P maps original to ordered indexing.
  void apply_linv(const double* v, double* out) const;
  /// Adjoint: Pᵀ (I − A)ᵀ D^{-1/2} w, accumulated into `out`.
  void apply_linv_transpose_add(const double* w, double* out) const;

  /// Dense implied precision in original indexing. Small n only.
  Eigen::MatrixXd dense_precision() const;

  /// Writes `row,col,value` lines in ordered positions: off-diagonal entries
  /// are A, diagonal entries are D.
  void write_csv(std::ostream& os) const;

 private:
  friend NNGPFactor build_nngp_factor(const spatial::LocationSet&, const spatial::Ordering&,
                                      const spatial::NeighborSets&, const spatial::Kernel&, unsigned);

  spatial::Ordering ordering_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_;  // ordered positions
  std::vector<double> coef_;
  std::vector<double> d_diag_;
  std::vector<double> inv_sqrt_d_;
};

/// Builds A and D row by row from local m×m correlation solves. `workers`
/// splits rows across threads; the result does not depend on it.
NNGPFactor build_nngp_factor(const spatial::LocationSet& locs, const spatial::Ordering& ord,
                             const spatial::NeighborSets& nbrs, const spatial::Kernel& kernel,
                             unsigned workers = 1);

Eigen::VectorXd apply_linv(const NNGPFactor& f, const Eigen::VectorXd& v);
Eigen::VectorXd apply_linv_transpose(const NNGPFactor& f, const Eigen::VectorXd& v);

}  // namespace projmc2::nngp
