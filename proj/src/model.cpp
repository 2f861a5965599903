#include "projmc2/model.hpp"

#include "projmc2/error.hpp"

#include <cmath>
#include <string>

namespace projmc2::model {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_shape(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const std::string& what) {
  if (m.rows() != r || m.cols() != c) {
    throw Error(ErrorCode::DimensionMismatch,
                what + " has shape " + shape(m.rows(), m.cols()) + ", expected " + shape(r, c));
  }
}

void require_spd(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12)) {
    throw Error(ErrorCode::InvalidArgument, what + " must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, what + " is not positive definite");
}

/// Lower-triangular L⁻¹ for V = L Lᵀ.
Eigen::MatrixXd inverse_cholesky(const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(v).matrixL();
  return l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(v.rows(), v.cols()));
}

/// Stacks the augmented regression of (γ | F, Y): data rows [X F | Y], then
/// whitened prior rows for β and Λ unless the prior is flat.
void augmented_system(const Eigen::MatrixXd& f, const Dataset& data, const PriorSpec& priors, Eigen::MatrixXd& xs,
                      Eigen::MatrixXd& ys) {
  const Eigen::Index n = data.n(), p = data.p(), q = data.q(), k = f.cols();
  const Eigen::Index rows_b = priors.beta ? p : 0;
  const Eigen::Index rows_l = priors.lambda ? k : 0;
  xs = Eigen::MatrixXd::Zero(n + rows_b + rows_l, p + k);
  ys = Eigen::MatrixXd::Zero(n + rows_b + rows_l, q);
  xs.topLeftCorner(n, p) = data.x();
  xs.topRightCorner(n, k) = f;
  ys.topRows(n) = data.y();
  if (priors.beta) {
    const Eigen::MatrixXd li = inverse_cholesky(priors.beta->row_cov);
    xs.block(n, 0, p, p) = li;
    ys.middleRows(n, p) = li * priors.beta->mean;
  }
  if (priors.lambda) {
    const Eigen::MatrixXd li = inverse_cholesky(priors.lambda->row_cov);
    xs.block(n + rows_b, p, k, k) = li;
    ys.middleRows(n + rows_b, k) = li * priors.lambda->mean;
  }
}

Eigen::LLT<Eigen::MatrixXd> gram_cholesky(const Eigen::MatrixXd& xs) {
  const Eigen::Index c = xs.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(c, c);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
    ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
  }
  if (!ok) throw Error(ErrorCode::Numerical, "unidentified regression/loadings");
  return llt;
}

}  // namespace

Dataset::Dataset(Eigen::MatrixXd x, Eigen::MatrixXd y, spatial::LocationSet locs)
    : x_(std::move(x)), y_(std::move(y)), locs_(std::move(locs)) {
  const Eigen::Index n = y_.rows();
  if (x_.rows() != n || static_cast<Eigen::Index>(locs_.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "row counts differ: X has " + std::to_string(x_.rows()) + ", Y has " +
                                                  std::to_string(n) + ", locations have " +
                                                  std::to_string(locs_.size()));
  }
  if (y_.cols() < 1 || x_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "X and Y need at least one column");
  if (n <= x_.cols()) throw Error(ErrorCode::InvalidArgument, "need more sites than covariates (n > p)");
  if (!x_.allFinite() || !y_.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite entry in X or Y");

  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(x_).singularValues();
  if (!(sv.minCoeff() > 1e-10 * sv.maxCoeff())) throw Error(ErrorCode::InvalidArgument, "X is not of full column rank");

  for (Eigen::Index c = 0; c < x_.cols(); ++c) {
    if ((x_.col(c).array() == 1.0).all()) {
      intercept_ = c;
      break;
    }
  }
}

void PriorSpec::validate(Eigen::Index p, Eigen::Index q) const {
  const auto k = static_cast<Eigen::Index>(kernels.size());
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "prior needs at least one factor kernel");
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "inverse-gamma shape a must be positive");
  if (b.size() != q) throw Error(ErrorCode::DimensionMismatch, "inverse-gamma scales b must have length q");
  if (!(b.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "inverse-gamma scales b must be positive");
  if (m < 1 || m > nngp::kMaxNeighbors) {
    throw Error(ErrorCode::InvalidArgument, "neighbor count m must be in [1, " + std::to_string(nngp::kMaxNeighbors) + "]");
  }
  if (beta) {
    require_shape(beta->mean, p, q, "beta prior mean");
    require_shape(beta->row_cov, p, p, "beta prior covariance");
    require_spd(beta->row_cov, "beta prior covariance");
  }
  if (lambda) {
    require_shape(lambda->mean, k, q, "lambda prior mean");
    require_shape(lambda->row_cov, k, k, "lambda prior covariance");
    require_spd(lambda->row_cov, "lambda prior covariance");
  }
}

Eigen::MatrixXd MNIWCondParams::v_star() const {
  const Eigen::Index c = chol_vstar_inv.rows();
  const Eigen::MatrixXd linv =
      chol_vstar_inv.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(c, c));
  return linv.transpose() * linv;
}

Eigen::MatrixXd project_g(const Eigen::MatrixXd& f, bool reorthogonalize) {
  const Eigen::MatrixXd centered = f.rowwise() - f.colwise().mean();
  linalg::QRResult qr;
  try {
    qr = linalg::mgs_thin_qr(centered, reorthogonalize);
  } catch (const Error& e) {
    throw Error(ErrorCode::Numerical, std::string("degenerate factor draw: ") + e.what());
  }
  return std::sqrt(static_cast<double>(f.rows())) * qr.q;
}

FactorSystem build_factor_system(const ModelState& state, const Dataset& data,
                                 const std::vector<nngp::NNGPFactor>& factors) {
  const Eigen::Index n = data.n(), q = data.q();
  const auto k = static_cast<Eigen::Index>(factors.size());
  require_shape(state.beta, data.p(), q, "beta");
  require_shape(state.lambda, k, q, "lambda");
  if (state.sigma2.size() != q) throw Error(ErrorCode::DimensionMismatch, "sigma2 must have length q");
  if (!(state.sigma2.array() > 0.0).all()) throw Error(ErrorCode::InvalidArgument, "sigma2 must be positive");
  for (const auto& f : factors) {
    if (static_cast<Eigen::Index>(f.size()) != n) throw Error(ErrorCode::DimensionMismatch, "NNGP factor size != n");
  }

  const Eigen::RowVectorXd inv_sd = state.sigma2.array().rsqrt().transpose();
  const Eigen::MatrixXd w = state.lambda.array().rowwise() * inv_sd.array();  // Λ Σ^{-1/2}
  const auto* fac = &factors;

  FactorSystem sys;
  sys.n = n;
  sys.k = k;
  sys.op.nrows = n * (q + k);
  sys.op.ncols = n * k;
  sys.op.forward = [w, fac, n, q, k](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    const Eigen::Map<const Eigen::MatrixXd> f(in.data(), n, k);
    Eigen::Map<Eigen::MatrixXd>(out.data(), n, q).noalias() = f * w;
    for (Eigen::Index j = 0; j < k; ++j) (*fac)[static_cast<std::size_t>(j)].apply_linv(in.data() + j * n, out.data() + n * q + j * n);
  };
  sys.op.adjoint = [w, fac, n, q, k](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    const Eigen::Map<const Eigen::MatrixXd> top(in.data(), n, q);
    Eigen::Map<Eigen::MatrixXd>(out.data(), n, k).noalias() = top * w.transpose();
    for (Eigen::Index j = 0; j < k; ++j)
      (*fac)[static_cast<std::size_t>(j)].apply_linv_transpose_add(in.data() + n * q + j * n, out.data() + j * n);
  };

  sys.rhs = Eigen::VectorXd::Zero(n * (q + k));
  Eigen::Map<Eigen::MatrixXd>(sys.rhs.data(), n, q) =
      ((data.y() - data.x() * state.beta).array().rowwise() * inv_sd.array()).matrix();
  return sys;
}

FactorDraw sample_F(const FactorSystem& system, Rng& rng, const FactorDrawOptions& opts,
                    const Eigen::MatrixXd* warm_start) {
  Eigen::VectorXd rhs = system.rhs;
  if (!opts.zero_noise) {
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] += normal(rng);
  }
  FactorDraw draw;
  if (warm_start != nullptr) {
    require_shape(*warm_start, system.n, system.k, "warm start");
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(warm_start->data(), warm_start->size());
    draw.solve = linalg::lsmr(system.op, rhs, opts.lsmr, &x0);
  } else {
    draw.solve = linalg::lsmr(system.op, rhs, opts.lsmr);
  }
  draw.f = Eigen::Map<const Eigen::MatrixXd>(draw.solve.x.data(), system.n, system.k);
  return draw;
}

MNIWCondParams conditional_mniw_params(const Eigen::MatrixXd& f_tilde, const Dataset& data, const PriorSpec& priors) {
  const Eigen::Index n = data.n(), p = data.p(), q = data.q();
  if (f_tilde.rows() != n) throw Error(ErrorCode::DimensionMismatch, "factor rows != n");
  if (priors.b.size() != q) throw Error(ErrorCode::DimensionMismatch, "inverse-gamma scales b must have length q");
  if (priors.lambda && priors.lambda->mean.rows() != f_tilde.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "lambda prior rows != number of factors");
  }

  Eigen::MatrixXd xs, ys;
  augmented_system(f_tilde, data, priors, xs, ys);
  const auto llt = gram_cholesky(xs);

  MNIWCondParams out;
  out.p = p;
  out.chol_vstar_inv = llt.matrixL();
  out.mu_star = llt.solve(xs.transpose() * ys);
  const Eigen::MatrixXd resid = ys - xs * out.mu_star;
  out.a_star = priors.a + 0.5 * static_cast<double>(n);
  out.b_star = priors.b + 0.5 * resid.colwise().squaredNorm().transpose();
  return out;
}

Eigen::VectorXd sample_sigma2(const MNIWCondParams& params, Rng& rng) {
  std::gamma_distribution<double> gamma(params.a_star, 1.0);
  Eigen::VectorXd out(params.b_star.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = params.b_star[j] / gamma(rng);
  return out;
}

GammaDraw sample_gamma(const MNIWCondParams& params, const Eigen::VectorXd& sigma2, Rng& rng, bool zero_noise) {
  const Eigen::Index rows = params.mu_star.rows(), q = params.mu_star.cols();
  if (sigma2.size() != q) throw Error(ErrorCode::DimensionMismatch, "sigma2 must have length q");
  Eigen::MatrixXd gamma = params.mu_star;
  if (!zero_noise) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd u(rows, q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const double sd = std::sqrt(sigma2[j]);
      for (Eigen::Index i = 0; i < rows; ++i) u(i, j) = sd * normal(rng);
    }
    gamma += params.chol_vstar_inv.transpose().triangularView<Eigen::Upper>().solve(u);
  }
  return {gamma.topRows(params.p), gamma.bottomRows(rows - params.p)};
}

FullMNIWParams conditional_mniw_full_sigma_oracle(const Eigen::MatrixXd& f, const Dataset& data,
                                                  const PriorSpec& priors, const InverseWishartPrior& iw) {
  if (data.n() > 200) throw Error(ErrorCode::InvalidArgument, "full-covariance oracle is limited to n <= 200");
  require_shape(iw.psi, data.q(), data.q(), "inverse-Wishart scale");
  Eigen::MatrixXd xs, ys;
  augmented_system(f, data, priors, xs, ys);
  const auto llt = gram_cholesky(xs);
  FullMNIWParams out;
  out.mu_star = llt.solve(xs.transpose() * ys);
  out.v_star = llt.solve(Eigen::MatrixXd::Identity(xs.cols(), xs.cols()));
  const Eigen::MatrixXd resid = ys - xs * out.mu_star;
  out.psi_star = iw.psi + resid.transpose() * resid;
  out.nu_star = iw.nu + static_cast<double>(data.n());
  return out;
}

}  // namespace projmc2::model
