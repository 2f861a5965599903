#include "projmc2/spatial.hpp"

#include "projmc2/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace projmc2::spatial {

LocationSet::LocationSet(Eigen::MatrixXd coords) : coords_(std::move(coords)) {
  if (coords_.rows() == 0) throw Error(ErrorCode::InvalidArgument, "empty location set");
  if (coords_.cols() == 0) throw Error(ErrorCode::InvalidArgument, "locations need at least one coordinate");
  if (!coords_.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite coordinate in location set");

  std::vector<Eigen::Index> rows(static_cast<std::size_t>(coords_.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  const auto lex_less = [this](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < coords_.cols(); ++c) {
      if (coords_(a, c) != coords_(b, c)) return coords_(a, c) < coords_(b, c);
    }
    return a < b;
  };
  std::sort(rows.begin(), rows.end(), lex_less);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (coords_.row(rows[k]) == coords_.row(rows[k - 1])) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate location: rows " + std::to_string(std::min(rows[k], rows[k - 1])) +
                      " and " + std::to_string(std::max(rows[k], rows[k - 1])));
    }
  }
}

double LocationSet::distance(std::size_t i, std::size_t j) const {
  return std::sqrt(squared_distance(i, j));
}

std::vector<std::size_t> Ordering::inverse() const {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) inv[perm[pos]] = pos;
  return inv;
}

void Ordering::validate(std::size_t n) const {
  if (perm.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "ordering has " + std::to_string(perm.size()) +
                                                  " entries, expected " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (std::size_t idx : perm) {
    if (idx >= n || seen[idx]) throw Error(ErrorCode::InvalidArgument, "ordering is not a permutation");
    seen[idx] = true;
  }
}

Kernel::Kernel(KernelFamily family_, double decay_) : family(family_), decay(decay_) {
  if (!(decay > 0.0) || !std::isfinite(decay)) {
    throw Error(ErrorCode::InvalidArgument, "kernel decay must be positive and finite");
  }
}

double Kernel::at_distance(double distance) const {
  switch (family) {
    case KernelFamily::Exponential: return std::exp(-decay * distance);
  }
  return 0.0;
}

double correlation(const Kernel& kernel, const Eigen::Ref<const Eigen::RowVectorXd>& s,
                   const Eigen::Ref<const Eigen::RowVectorXd>& t) {
  if (s.size() != t.size()) throw Error(ErrorCode::DimensionMismatch, "points differ in dimension");
  return kernel.at_distance((s - t).norm());
}

Ordering maximin_order(const LocationSet& locs) {
  const std::size_t n = locs.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty location set");

  const Eigen::RowVectorXd centroid = locs.coords().colwise().mean();
  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = (locs.point(i) - centroid).squaredNorm();
    if (d2 < best) {
      best = d2;
      first = i;
    }
  }

  Ordering ord;
  ord.perm.reserve(n);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t next = first;
  for (std::size_t step = 0; step < n; ++step) {
    ord.perm.push_back(next);
    taken[next] = true;
    const auto p = locs.point(next);
    std::size_t arg = n;
    double arg_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d2 = (locs.point(i) - p).squaredNorm();
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > arg_d2) {  // strict: earlier index wins ties
        arg_d2 = min_d2[i];
        arg = i;
      }
    }
    next = arg;
  }
  return ord;
}

namespace {

/// Static k-d tree over ordered positions. Each node records the smallest
/// position it contains so predecessor-restricted queries can skip subtrees.
class KdTree {
 public:
  KdTree(const Eigen::MatrixXd& pts, std::vector<std::size_t> labels) : pts_(pts), labels_(std::move(labels)) {
    items_.resize(static_cast<std::size_t>(pts_.rows()));
    std::iota(items_.begin(), items_.end(), std::size_t{0});
    if (!items_.empty()) build(0, items_.size());
  }

  struct Candidate {
    double d2;
    std::size_t label;  // tie-break key
    std::size_t item;
    bool operator<(const Candidate& o) const { return d2 != o.d2 ? d2 < o.d2 : label < o.label; }
  };

  /// k nearest items to `query` among items with index < limit, excluding `skip`.
  std::vector<Candidate> knn(const Eigen::RowVectorXd& query, std::size_t k, std::size_t limit,
                             std::size_t skip) const {
    std::priority_queue<Candidate> heap;  // max-heap: top is current worst
    if (k > 0 && !nodes_.empty()) search(0, query, k, limit, skip, heap);
    std::vector<Candidate> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::size_t begin, end;
    std::size_t min_item;
    Eigen::RowVectorXd lo, hi;
    std::ptrdiff_t left = -1, right = -1;
  };
  static constexpr std::size_t kLeaf = 8;

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end, *std::min_element(items_.begin() + begin, items_.begin() + end),
                          Eigen::RowVectorXd(), Eigen::RowVectorXd()});
    Eigen::RowVectorXd lo = pts_.row(static_cast<Eigen::Index>(items_[begin]));
    Eigen::RowVectorXd hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(pts_.row(static_cast<Eigen::Index>(items_[i])));
      hi = hi.cwiseMax(pts_.row(static_cast<Eigen::Index>(items_[i])));
    }
    if (end - begin > kLeaf) {
      Eigen::Index axis = 0;
      (hi - lo).maxCoeff(&axis);
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(items_.begin() + begin, items_.begin() + mid, items_.begin() + end,
                       [&](std::size_t a, std::size_t b) {
                         return pts_(static_cast<Eigen::Index>(a), axis) < pts_(static_cast<Eigen::Index>(b), axis);
                       });
      const auto left = static_cast<std::ptrdiff_t>(build(begin, mid));
      const auto right = static_cast<std::ptrdiff_t>(build(mid, end));
      nodes_[id].left = left;
      nodes_[id].right = right;
    }
    nodes_[id].lo = std::move(lo);
    nodes_[id].hi = std::move(hi);
    return id;
  }

  double box_d2(const Node& node, const Eigen::RowVectorXd& q) const {
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < q.size(); ++c) {
      const double gap = std::max({node.lo[c] - q[c], 0.0, q[c] - node.hi[c]});
      d2 += gap * gap;
    }
    return d2;
  }

  void search(std::size_t id, const Eigen::RowVectorXd& q, std::size_t k, std::size_t limit, std::size_t skip,
              std::priority_queue<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.min_item >= limit) return;
    if (heap.size() == k && box_d2(node, q) > heap.top().d2) return;
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t item = items_[i];
        if (item >= limit || item == skip) continue;
        const Candidate c{(pts_.row(static_cast<Eigen::Index>(item)) - q).squaredNorm(), labels_[item], item};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const auto l = static_cast<std::size_t>(node.left);
    const auto r = static_cast<std::size_t>(node.right);
    const double dl = box_d2(nodes_[l], q);
    const double dr = box_d2(nodes_[r], q);
    if (dl <= dr) {
      search(l, q, k, limit, skip, heap);
      search(r, q, k, limit, skip, heap);
    } else {
      search(r, q, k, limit, skip, heap);
      search(l, q, k, limit, skip, heap);
    }
  }

  const Eigen::MatrixXd& pts_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> items_;
  std::vector<Node> nodes_;
};

}  // namespace

NeighborSets predecessor_neighbors(const LocationSet& locs, const Ordering& ord, std::size_t m) {
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "neighbor count m must be at least 1");
  const std::size_t n = locs.size();
  ord.validate(n);

  // Tree items are ordered positions; labels carry the original index.
  Eigen::MatrixXd ordered(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(locs.dim()));
  for (std::size_t pos = 0; pos < n; ++pos) ordered.row(static_cast<Eigen::Index>(pos)) = locs.point(ord.perm[pos]);
  const KdTree tree(ordered, ord.perm);

  NeighborSets out;
  out.m = m;
  out.sets.resize(n);
  for (std::size_t i = 1; i < n; ++i) {
    const Eigen::RowVectorXd q = ordered.row(static_cast<Eigen::Index>(i));
    const auto found = tree.knn(q, std::min(i, m), i, n);
    auto& set = out.sets[i];
    set.reserve(found.size());
    for (const auto& c : found) set.push_back(c.item);
  }
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const LocationSet& locs, std::size_t k) {
  const std::size_t n = locs.size();
  std::vector<std::size_t> labels(n);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  const KdTree tree(locs.coords(), labels);
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto found = tree.knn(locs.point(i), std::min(k, n - 1), n, i);
    for (const auto& c : found) out[i].push_back(c.item);
  }
  return out;
}

}  // namespace projmc2::spatial
