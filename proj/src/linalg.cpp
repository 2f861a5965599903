#include "projmc2/linalg.hpp"

#include "projmc2/error.hpp"
#include "projmc2/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace projmc2::linalg {

Eigen::VectorXd LinearOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != ncols) throw Error(ErrorCode::DimensionMismatch, "operator input length mismatch");
  Eigen::VectorXd out(nrows);
  forward(x, out);
  return out;
}

Eigen::VectorXd LinearOperator::apply_adjoint(const Eigen::VectorXd& y) const {
  if (y.size() != nrows) throw Error(ErrorCode::DimensionMismatch, "operator adjoint input length mismatch");
  Eigen::VectorXd out(ncols);
  adjoint(y, out);
  return out;
}

LinearOperator LinearOperator::from_dense(const Eigen::MatrixXd& a) {
  LinearOperator op;
  op.nrows = a.rows();
  op.ncols = a.cols();
  op.forward = [a](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out.noalias() = a * in; };
  op.adjoint = [a](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out.noalias() = a.transpose() * in; };
  return op;
}

std::string_view to_string(LsmrStop stop) {
  switch (stop) {
    case LsmrStop::ZeroSolution: return "zero solution";
    case LsmrStop::Compatible: return "compatible system solved";
    case LsmrStop::LeastSquares: return "least-squares solution";
    case LsmrStop::ConditionLimit: return "condition limit";
    case LsmrStop::CompatibleEps: return "compatible system solved to machine precision";
    case LsmrStop::LeastSquaresEps: return "least-squares solution to machine precision";
    case LsmrStop::ConditionLimitEps: return "condition limit at machine precision";
    case LsmrStop::IterationLimit: return "iteration limit";
  }
  return "unknown";
}

namespace {

struct Givens {
  double c, s, r;
};

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// Stable Givens rotation: [c s; -s c][a; b] = [r; 0].
Givens sym_ortho(double a, double b) {
  if (b == 0.0) return {sign(a), 0.0, std::abs(a)};
  if (a == 0.0) return {0.0, sign(b), std::abs(b)};
  if (std::abs(b) > std::abs(a)) {
    const double tau = a / b;
    const double s = sign(b) / std::sqrt(1.0 + tau * tau);
    return {s * tau, s, b / s};
  }
  const double tau = b / a;
  const double c = sign(a) / std::sqrt(1.0 + tau * tau);
  return {c, c * tau, a / c};
}

}  // namespace

LsmrResult lsmr(const LinearOperator& op, const Eigen::VectorXd& rhs, const LsmrOptions& opts,
                const Eigen::VectorXd* x0, const LsmrObserver& observer) {
  if (rhs.size() != op.nrows) {
    throw Error(ErrorCode::DimensionMismatch, "lsmr: rhs length " + std::to_string(rhs.size()) +
                                                  " != operator rows " + std::to_string(op.nrows));
  }
  if (!(opts.atol > 0.0) || !(opts.btol > 0.0)) throw Error(ErrorCode::InvalidArgument, "lsmr: tolerances must be positive");
  const Eigen::Index max_iter = opts.max_iter > 0 ? opts.max_iter : 4 * op.ncols;

  LsmrResult res;
  Eigen::VectorXd u = rhs;
  Eigen::VectorXd scratch_m(op.nrows);
  Eigen::VectorXd scratch_n(op.ncols);
  if (x0 != nullptr) {
    if (x0->size() != op.ncols) throw Error(ErrorCode::DimensionMismatch, "lsmr: x0 length mismatch");
    op.forward(*x0, scratch_m);
    u -= scratch_m;
  }
  const auto finish = [&](Eigen::VectorXd dx) {
    res.x = x0 != nullptr ? Eigen::VectorXd(*x0 + dx) : std::move(dx);
    return res;
  };

  double beta = u.norm();
  const double norm_b = beta;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(op.ncols);
  double alpha = 0.0;
  if (beta > 0.0) {
    u /= beta;
    op.adjoint(u, v);
    alpha = v.norm();
  }
  if (alpha > 0.0) v /= alpha;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(op.ncols);
  res.norm_r = beta;
  res.norm_ar = alpha * beta;
  if (res.norm_ar == 0.0) return finish(std::move(x));

  double zetabar = alpha * beta;
  double alphabar = alpha;
  double rho = 1.0, rhobar = 1.0, cbar = 1.0, sbar = 0.0;
  Eigen::VectorXd h = v;
  Eigen::VectorXd hbar = Eigen::VectorXd::Zero(op.ncols);

  double betadd = beta, betad = 0.0, rhodold = 1.0, tautildeold = 0.0, thetatilde = 0.0, zeta = 0.0, d = 0.0;
  double norm_a2 = alpha * alpha;
  double maxrbar = 0.0, minrbar = std::numeric_limits<double>::max();

  Eigen::Index itn = 0;
  while (true) {
    ++itn;
    // Golub–Kahan bidiagonalization step.
    op.forward(v, scratch_m);
    u = scratch_m - alpha * u;
    beta = u.norm();
    if (beta > 0.0) {
      u /= beta;
      op.adjoint(u, scratch_n);
      v = scratch_n - beta * v;
      alpha = v.norm();
      if (alpha > 0.0) v /= alpha;
    }

    const double alphahat = std::abs(alphabar);
    const double chat = sign(alphabar);
    const double shat = 0.0;

    const double rhoold = rho;
    const Givens g1 = sym_ortho(alphahat, beta);
    rho = g1.r;
    const double thetanew = g1.s * alpha;
    alphabar = g1.c * alpha;

    const double rhobarold = rhobar;
    const double zetaold = zeta;
    const double thetabar = sbar * rho;
    const double rhotemp = cbar * rho;
    const Givens g2 = sym_ortho(cbar * rho, thetanew);
    cbar = g2.c;
    sbar = g2.s;
    rhobar = g2.r;
    zeta = cbar * zetabar;
    zetabar = -sbar * zetabar;

    hbar = h - (thetabar * rho / (rhoold * rhobarold)) * hbar;
    x += (zeta / (rho * rhobar)) * hbar;
    h = v - (thetanew / rho) * h;

    // Running estimate of ‖r‖.
    const double betaacute = chat * betadd;
    const double betacheck = -shat * betadd;
    const double betahat = g1.c * betaacute;
    betadd = -g1.s * betaacute;
    const double thetatildeold = thetatilde;
    const Givens g3 = sym_ortho(rhodold, thetabar);
    thetatilde = g3.s * rhobar;
    rhodold = g3.c * rhobar;
    betad = -g3.s * betad + g3.c * betahat;
    tautildeold = (zetaold - thetatildeold * tautildeold) / g3.r;
    const double taud = (zeta - thetatilde * tautildeold) / rhodold;
    d += betacheck * betacheck;
    const double norm_r = std::sqrt(d + (betad - taud) * (betad - taud) + betadd * betadd);

    norm_a2 += beta * beta;
    const double norm_a = std::sqrt(norm_a2);
    norm_a2 += alpha * alpha;

    maxrbar = std::max(maxrbar, rhobarold);
    if (itn > 1) minrbar = std::min(minrbar, rhobarold);
    const double cond_a = std::max(maxrbar, rhotemp) / std::min(minrbar, rhotemp);

    const double norm_ar = std::abs(zetabar);
    const double norm_x = x.norm();
    res.norm_r = norm_r;
    res.norm_ar = norm_ar;
    res.iterations = itn;
    if (observer) observer(itn, x0 != nullptr ? Eigen::VectorXd(*x0 + x) : x);

    const double test1 = norm_r / norm_b;
    const double test2 = norm_a * norm_r != 0.0 ? norm_ar / (norm_a * norm_r) : std::numeric_limits<double>::infinity();
    const double test3 = 1.0 / cond_a;
    const double t1 = test1 / (1.0 + norm_a * norm_x / norm_b);
    const double rtol = opts.btol + opts.atol * norm_a * norm_x / norm_b;

    bool stop = false;
    if (itn >= max_iter) { res.stop = LsmrStop::IterationLimit; stop = true; }
    if (1.0 + test3 <= 1.0) { res.stop = LsmrStop::ConditionLimitEps; stop = true; }
    if (1.0 + test2 <= 1.0) { res.stop = LsmrStop::LeastSquaresEps; stop = true; }
    if (1.0 + t1 <= 1.0) { res.stop = LsmrStop::CompatibleEps; stop = true; }
    if (test2 <= opts.atol) { res.stop = LsmrStop::LeastSquares; stop = true; }
    if (test1 <= rtol) { res.stop = LsmrStop::Compatible; stop = true; }
    if (stop) break;
  }
  return finish(std::move(x));
}

QRResult mgs_thin_qr(const Eigen::MatrixXd& mat, bool reorthogonalize) {
  const Eigen::Index n = mat.rows();
  const Eigen::Index k = mat.cols();
  if (k > n) throw Error(ErrorCode::InvalidArgument, "mgs_thin_qr: more columns than rows");

  const double scale = k > 0 ? mat.colwise().norm().maxCoeff() : 0.0;
  QRResult out{Eigen::MatrixXd(n, k), Eigen::MatrixXd::Zero(k, k)};
  Eigen::VectorXd col(n);
  for (Eigen::Index j = 0; j < k; ++j) {
    col = mat.col(j);
    for (int pass = 0; pass < (reorthogonalize ? 2 : 1); ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double rij = out.q.col(i).dot(col);
        out.r(i, j) += rij;
        col.noalias() -= rij * out.q.col(i);
      }
    }
    const double rjj = col.norm();
    if (!(rjj > 1e-12 * scale)) {
      throw Error(ErrorCode::Numerical, "mgs_thin_qr: column " + std::to_string(j) + " is numerically dependent");
    }
    out.r(j, j) = rjj;
    out.q.col(j) = col / rjj;
  }
  return out;
}

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

SvdResult randomized_svd(const Eigen::MatrixXd& mat, Eigen::Index rank, Eigen::Index oversample,
                         Eigen::Index power_iters, std::uint64_t seed) {
  const Eigen::Index n = mat.rows();
  const Eigen::Index q = mat.cols();
  if (rank < 1 || rank > std::min(n, q)) {
    throw Error(ErrorCode::InvalidArgument, "randomized_svd: rank must be in [1, min(rows, cols)]");
  }
  if (oversample < 0 || power_iters < 0) {
    throw Error(ErrorCode::InvalidArgument, "randomized_svd: oversample and power_iters must be non-negative");
  }
  const Eigen::Index width = std::min(rank + oversample, std::min(n, q));

  Rng rng = make_stream(seed, Stream::Initialization);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd omega(q, width);
  for (Eigen::Index j = 0; j < width; ++j)
    for (Eigen::Index i = 0; i < q; ++i) omega(i, j) = normal(rng);

  Eigen::MatrixXd basis = orthonormal_basis(mat * omega);
  for (Eigen::Index it = 0; it < power_iters; ++it) {
    const Eigen::MatrixXd z = orthonormal_basis(mat.transpose() * basis);
    basis = orthonormal_basis(mat * z);
  }

  const Eigen::MatrixXd small = basis.transpose() * mat;  // width × q
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.u = basis * svd.matrixU().leftCols(rank);
  out.s = svd.singularValues().head(rank);
  out.v = svd.matrixV().leftCols(rank);
  return out;
}

}  // namespace projmc2::linalg
