#include "projmc2/nngp.hpp"

#include "projmc2/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

namespace projmc2::nngp {

namespace {

struct RowResult {
  std::vector<double> coef;
  double d = 1.0;
  bool degenerate = false;
};

RowResult solve_row(const spatial::LocationSet& locs, const spatial::Ordering& ord,
                    const std::vector<std::size_t>& nb, const spatial::Kernel& kernel, std::size_t i) {
  RowResult row;
  const std::size_t site = ord.perm[i];
  const double c_ii = kernel.at_distance(0.0);
  if (nb.empty()) {
    row.d = c_ii;
    row.degenerate = !(row.d > 0.0);
    return row;
  }
  const auto k = static_cast<Eigen::Index>(nb.size());
  Eigen::MatrixXd c_nn(k, k);
  Eigen::VectorXd c_in(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const std::size_t sa = ord.perm[nb[static_cast<std::size_t>(a)]];
    c_in[a] = kernel.at_distance(locs.distance(site, sa));
    c_nn(a, a) = c_ii;
    for (Eigen::Index b = 0; b < a; ++b) {
      const std::size_t sb = ord.perm[nb[static_cast<std::size_t>(b)]];
      c_nn(a, b) = c_nn(b, a) = kernel.at_distance(locs.distance(sa, sb));
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(c_nn);
  if (llt.info() != Eigen::Success) {
    c_nn.diagonal().array() += 1e-10;
    llt.compute(c_nn);
    if (llt.info() != Eigen::Success) {
      row.degenerate = true;
      return row;
    }
  }
  const Eigen::VectorXd a = llt.solve(c_in);
  row.coef.assign(a.data(), a.data() + a.size());
  row.d = c_ii - a.dot(c_in);
  row.degenerate = !(row.d > 0.0) || !a.allFinite();
  return row;
}

}  // namespace

NNGPFactor build_nngp_factor(const spatial::LocationSet& locs, const spatial::Ordering& ord,
                             const spatial::NeighborSets& nbrs, const spatial::Kernel& kernel, unsigned workers) {
  const std::size_t n = locs.size();
  ord.validate(n);
  if (nbrs.size() != n) throw Error(ErrorCode::DimensionMismatch, "neighbor sets do not match location count");
  if (!(kernel.decay > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel decay must be positive");

  std::vector<RowResult> rows(n);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) rows[i] = solve_row(locs, ord, nbrs.sets[i], kernel, i);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n / 256, 1))));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk);
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
  }

  NNGPFactor f;
  f.ordering_ = ord;
  f.row_ptr_.reserve(n + 1);
  f.d_diag_.resize(n);
  f.inv_sqrt_d_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].degenerate) {
      throw Error(ErrorCode::Numerical, "degenerate NNGP conditional variance at ordered row " + std::to_string(i) +
                                            " (site " + std::to_string(ord.perm[i]) + ")");
    }
    const auto& nb = nbrs.sets[i];
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] >= i) throw Error(ErrorCode::InvalidArgument, "neighbor set of row " + std::to_string(i) +
                                                                   " contains a non-predecessor");
      f.col_.push_back(nb[k]);
      f.coef_.push_back(rows[i].coef[k]);
    }
    f.row_ptr_.push_back(f.col_.size());
    f.d_diag_[i] = rows[i].d;
    f.inv_sqrt_d_[i] = 1.0 / std::sqrt(rows[i].d);
  }
  return f;
}

void NNGPFactor::apply_linv(const double* v, double* out) const {
  const auto& perm = ordering_.perm;
  for (std::size_t i = 0; i < d_diag_.size(); ++i) {
    double acc = v[perm[i]];
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc -= coef_[k] * v[perm[col_[k]]];
    out[i] = acc * inv_sqrt_d_[i];
  }
}

void NNGPFactor::apply_linv_transpose_add(const double* w, double* out) const {
  const auto& perm = ordering_.perm;
  for (std::size_t i = 0; i < d_diag_.size(); ++i) {
    const double t = w[i] * inv_sqrt_d_[i];
    out[perm[i]] += t;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out[perm[col_[k]]] -= coef_[k] * t;
  }
}

Eigen::MatrixXd NNGPFactor::dense_precision() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd linv = Eigen::MatrixXd::Zero(n, n);  // rows: ordered, cols: original
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    apply_linv(e.data(), linv.col(j).data());
    e[j] = 0.0;
  }
  return linv.transpose() * linv;
}

void NNGPFactor::write_csv(std::ostream& os) const {
  os << "row,col,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) os << i << ',' << col_[k] << ',' << coef_[k] << '\n';
    os << i << ',' << i << ',' << d_diag_[i] << '\n';
  }
}

Eigen::VectorXd apply_linv(const NNGPFactor& f, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "apply_linv: vector length " + std::to_string(v.size()) +
                                                  " does not match factor size " + std::to_string(f.size()));
  }
  Eigen::VectorXd out(v.size());
  f.apply_linv(v.data(), out.data());
  return out;
}

Eigen::VectorXd apply_linv_transpose(const NNGPFactor& f, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "apply_linv_transpose: vector length " + std::to_string(v.size()) +
                                                  " does not match factor size " + std::to_string(f.size()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  f.apply_linv_transpose_add(v.data(), out.data());
  return out;
}

}  // namespace projmc2::nngp
