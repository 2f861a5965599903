#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace projmc2::spatial {

/// Spatial sites, one per row. Construction rejects empty input, non-finite
/// coordinates, and duplicate rows.
class LocationSet {
 public:
  LocationSet() = default;
  explicit LocationSet(Eigen::MatrixXd coords);

  std::size_t size() const { return static_cast<std::size_t>(coords_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(coords_.cols()); }
  bool empty() const { return coords_.rows() == 0; }

  const Eigen::MatrixXd& coords() const { return coords_; }
  auto point(std::size_t i) const { return coords_.row(static_cast<Eigen::Index>(i)); }

  double squared_distance(std::size_t i, std::size_t j) const {
    return (point(i) - point(j)).squaredNorm();
  }
  double distance(std::size_t i, std::size_t j) const;

 private:
  Eigen::MatrixXd coords_;
};

/// perm[position] = original site index.
struct Ordering {
  std::vector<std::size_t> perm;

  std::size_t size() const { return perm.size(); }
  /// inverse[original index] = position.
  std::vector<std::size_t> inverse() const;
  void validate(std::size_t n) const;
};

/// sets[i] lists ordered positions (< i) of the nearest predecessors of
/// position i, closest first.
struct NeighborSets {
  std::vector<std::vector<std::size_t>> sets;
  std::size_t m = 0;

  std::size_t size() const { return sets.size(); }
};

enum class KernelFamily { Exponential };

struct Kernel {
  KernelFamily family = KernelFamily::Exponential;
  double decay = 1.0;

  Kernel() = default;
  Kernel(KernelFamily family, double decay);

  static Kernel exponential(double decay) { return Kernel(KernelFamily::Exponential, decay); }

  double at_distance(double distance) const;
};

double correlation(const Kernel& kernel, const Eigen::Ref<const Eigen::RowVectorXd>& s,
                   const Eigen::Ref<const Eigen::RowVectorXd>& t);

/// Maximin ordering: start at the site nearest the centroid, then repeatedly
/// take the site farthest from all chosen ones. Ties go to the smallest
/// original index.
Ordering maximin_order(const LocationSet& locs);

/// Exact m-nearest predecessors for every ordered position. Distance ties go
/// to the smallest original index.
NeighborSets predecessor_neighbors(const LocationSet& locs, const Ordering& ord, std::size_t m);

/// Orders every site's k nearest neighbors (all sites, not only predecessors).
/// Used by smoothness summaries.
std::vector<std::vector<std::size_t>> nearest_neighbors(const LocationSet& locs, std::size_t k);

}  // namespace projmc2::spatial
