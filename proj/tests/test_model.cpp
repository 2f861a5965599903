#include "oracles.hpp"

#include "projmc2/error.hpp"
#include "projmc2/model.hpp"

#include <doctest.h>

using namespace projmc2;

namespace {

model::Dataset make_data(Eigen::Index n, Eigen::Index p, Eigen::Index q, std::mt19937_64& rng) {
  Eigen::MatrixXd x = oracle::gaussian(n, p, rng);
  x.col(0).setOnes();
  return model::Dataset(x, oracle::gaussian(n, q, rng), spatial::LocationSet(oracle::uniform_sites(n, rng)));
}

std::vector<nngp::NNGPFactor> exact_factors(const model::Dataset& d, const std::vector<double>& phis) {
  const auto ord = spatial::maximin_order(d.locs());
  const auto nb = spatial::predecessor_neighbors(d.locs(), ord, static_cast<std::size_t>(d.n() - 1));
  std::vector<nngp::NNGPFactor> out;
  for (const double phi : phis) out.push_back(nngp::build_nngp_factor(d.locs(), ord, nb, spatial::Kernel::exponential(phi)));
  return out;
}

/// Sample covariance entry standard error under Gaussianity.
double cov_se(const Eigen::MatrixXd& c, Eigen::Index i, Eigen::Index j, double n) {
  return std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / n);
}

model::PriorSpec informative(Eigen::Index p, Eigen::Index k, Eigen::Index q, std::mt19937_64& rng) {
  model::PriorSpec pr;
  const Eigen::MatrixXd lb = oracle::gaussian(p, p, rng), ll = oracle::gaussian(k, k, rng);
  pr.beta = model::MatrixNormalPrior{oracle::gaussian(p, q, rng), lb * lb.transpose() + Eigen::MatrixXd::Identity(p, p)};
  pr.lambda = model::MatrixNormalPrior{oracle::gaussian(k, q, rng), ll * ll.transpose() + Eigen::MatrixXd::Identity(k, k)};
  pr.a = 2.5;
  pr.b = Eigen::VectorXd::LinSpaced(q, 0.5, 1.5);
  for (Eigen::Index i = 0; i < k; ++i) pr.kernels.push_back(spatial::Kernel::exponential(6.0));
  return pr;
}

}  // namespace

TEST_CASE("dataset validation") {
  std::mt19937_64 rng(1);
  const auto d = make_data(20, 2, 3, rng);
  CHECK(d.intercept_column() == 0);
  CHECK(d.n() == 20);
  CHECK(d.p() == 2);
  CHECK(d.q() == 3);
  const spatial::LocationSet locs(oracle::uniform_sites(20, rng));
  CHECK_THROWS_AS(model::Dataset(oracle::gaussian(19, 2, rng), oracle::gaussian(20, 3, rng), locs), Error);
  Eigen::MatrixXd rank_def = oracle::gaussian(20, 2, rng);
  rank_def.col(1) = 2.0 * rank_def.col(0);
  CHECK_THROWS_WITH(model::Dataset(rank_def, oracle::gaussian(20, 3, rng), locs), doctest::Contains("full column rank"));
  const spatial::LocationSet two(oracle::uniform_sites(2, rng));
  CHECK_THROWS_AS(model::Dataset(oracle::gaussian(2, 2, rng), oracle::gaussian(2, 1, rng), two), Error);
  CHECK_FALSE(model::Dataset(oracle::gaussian(20, 2, rng), oracle::gaussian(20, 1, rng), locs).intercept_column());
}

TEST_CASE("prior validation caps the neighbor count") {
  model::PriorSpec pr;
  pr.kernels = {spatial::Kernel::exponential(4), spatial::Kernel::exponential(6)};
  pr.b = Eigen::VectorXd::Ones(10);
  CHECK_NOTHROW(pr.validate(2, 10));
  pr.m = 21;
  CHECK_THROWS_AS(pr.validate(2, 10), Error);
  pr.m = 20;
  pr.b = Eigen::VectorXd::Ones(9);
  CHECK_THROWS_AS(pr.validate(2, 10), Error);
}

TEST_CASE("projection fixed point") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd f = model::project_g(oracle::gaussian(50, 3, rng));
  CHECK((model::project_g(f) - f).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projection is invariant to upper-triangular mixing and shifts") {
  std::mt19937_64 rng(3);
  for (const Eigen::Index k : {1, 2, 5}) {
    const Eigen::MatrixXd ft = model::project_g(oracle::gaussian(200, k, rng));
    const Eigen::MatrixXd r = oracle::random_upper_positive(k, rng);
    const Eigen::RowVectorXd mu = oracle::gaussian(1, k, rng);
    const Eigen::MatrixXd moved = (ft * r).rowwise() + mu;
    CHECK((model::project_g(moved) - ft).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("projection output is centered with scaled identity Gram") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd f = model::project_g(oracle::gaussian(200, 2, rng) * 3.0);
  CHECK(f.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.transpose() * f - 200.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(10, 2);
  constant.col(1) = oracle::gaussian(10, 1, rng);
  CHECK_THROWS_WITH(model::project_g(constant), doctest::Contains("degenerate factor draw"));
}

TEST_CASE("factor system adjoint consistency") {
  std::mt19937_64 rng(5);
  const auto d = make_data(30, 2, 4, rng);
  const auto factors = exact_factors(d, {4.0, 9.0});
  model::ModelState s{oracle::gaussian(2, 4, rng), oracle::gaussian(2, 4, rng), Eigen::VectorXd::LinSpaced(4, 0.5, 2.0),
                      Eigen::MatrixXd::Zero(30, 2)};
  const auto sys = model::build_factor_system(s, d, factors);
  CHECK(sys.op.nrows == 30 * 6);
  CHECK(sys.op.ncols == 60);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd x = oracle::gaussian(60, 1, rng), y = oracle::gaussian(180, 1, rng);
    const double lhs = sys.op.apply(x).dot(y), rhs = x.dot(sys.op.apply_adjoint(y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
}

TEST_CASE("factor system normal equations equal the dense posterior") {
  std::mt19937_64 rng(6);
  const auto d = make_data(15, 2, 3, rng);
  const std::vector<double> phis{4.0, 9.0};
  const auto factors = exact_factors(d, phis);
  model::ModelState s{oracle::gaussian(2, 3, rng), oracle::gaussian(2, 3, rng), Eigen::Vector3d(0.5, 1.0, 2.0),
                      Eigen::MatrixXd::Zero(15, 2)};
  const auto sys = model::build_factor_system(s, d, factors);
  Eigen::MatrixXd dense(sys.op.nrows, sys.op.ncols);
  for (Eigen::Index j = 0; j < sys.op.ncols; ++j) dense.col(j) = sys.op.apply(Eigen::VectorXd::Unit(sys.op.ncols, j));

  std::vector<Eigen::MatrixXd> q;
  for (const double phi : phis) q.push_back(oracle::dense_cov(d.locs().coords(), phi).inverse());
  const auto post = oracle::factor_posterior(d.y() - d.x() * s.beta, s.lambda, s.sigma2, q);
  const Eigen::MatrixXd prec = dense.transpose() * dense;
  const Eigen::MatrixXd prec_ref = post.cov.inverse();
  CHECK((prec - prec_ref).cwiseAbs().maxCoeff() < 1e-8 * prec_ref.cwiseAbs().maxCoeff());

  Rng r(1);
  const auto mean = model::sample_F(sys, r, {linalg::LsmrOptions{1e-14, 1e-14, 0}, true});
  const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(mean.f.data(), mean.f.size());
  CHECK((got - post.mean).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, post.mean.cwiseAbs().maxCoeff()));
}

TEST_CASE("tiny single-factor posterior mean matches the closed form") {
  std::mt19937_64 rng(7);
  const auto d = make_data(4, 1, 1, rng);
  const auto factors = exact_factors(d, {6.0});
  const double lambda = 1.3, sigma2 = 0.7;
  model::ModelState s{Eigen::MatrixXd::Constant(1, 1, 0.2), Eigen::MatrixXd::Constant(1, 1, lambda),
                      Eigen::VectorXd::Constant(1, sigma2), Eigen::MatrixXd::Zero(4, 1)};
  const auto sys = model::build_factor_system(s, d, factors);
  const Eigen::MatrixXd cinv = oracle::dense_cov(d.locs().coords(), 6.0).inverse();
  const Eigen::MatrixXd prec = cinv + lambda * lambda / sigma2 * Eigen::MatrixXd::Identity(4, 4);
  const Eigen::VectorXd mean = prec.ldlt().solve(lambda / sigma2 * (d.y() - d.x() * s.beta));
  Rng r(0);
  const auto f = model::sample_F(sys, r, {linalg::LsmrOptions{1e-14, 1e-14, 0}, true}).f;
  CHECK((f.col(0) - mean).cwiseAbs().maxCoeff() < 1e-8);

  const int draws = 20000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  Rng r2(11);
  for (int i = 0; i < draws; ++i) acc += model::sample_F(sys, r2).f.col(0);
  acc /= draws;
  const Eigen::MatrixXd cov = prec.inverse();
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(acc[i] - mean[i]) < 3.0 * std::sqrt(cov(i, i) / draws));
}

TEST_CASE("zero loadings leave the factor prior unchanged") {
  std::mt19937_64 rng(8);
  const auto d = make_data(4, 1, 1, rng);
  const auto factors = exact_factors(d, {6.0});
  model::ModelState s{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Ones(1),
                      Eigen::MatrixXd::Zero(4, 1)};
  const auto sys = model::build_factor_system(s, d, factors);
  const Eigen::MatrixXd c = oracle::dense_cov(d.locs().coords(), 6.0);
  const int draws = 20000;
  Eigen::MatrixXd samples(4, draws);
  Rng r(12);
  for (int i = 0; i < draws; ++i) samples.col(i) = model::sample_F(sys, r).f.col(0);
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - mean;
  const Eigen::MatrixXd emp = centered * centered.transpose() / (draws - 1);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(std::abs(mean[i]) < 3.0 * std::sqrt(c(i, i) / draws));
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(emp(i, j) - c(i, j)) < 3.0 * cov_se(c, i, j, draws));
  }
}

TEST_CASE("conjugate parameters match the textbook update") {
  std::mt19937_64 rng(9);
  const auto d = make_data(12, 1, 2, rng);
  const Eigen::MatrixXd f = oracle::gaussian(12, 1, rng);
  const auto pr = informative(1, 1, 2, rng);
  const auto params = model::conditional_mniw_params(f, d, pr);

  Eigen::MatrixXd design(12, 2);
  design << d.x(), f;
  Eigen::MatrixXd m0(2, 2), prec0 = Eigen::MatrixXd::Zero(2, 2);
  m0 << pr.beta->mean, pr.lambda->mean;
  prec0(0, 0) = 1.0 / pr.beta->row_cov(0, 0);
  prec0(1, 1) = 1.0 / pr.lambda->row_cov(0, 0);
  const auto ref = oracle::conjugate(design, d.y(), m0, prec0);

  CHECK((params.mu_star - ref.mu).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((params.v_star() - ref.v).cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(params.b_star[j] - (pr.b[j] + 0.5 * ref.s(j, j))) < 1e-10);
  CHECK(params.a_star == pr.a + 6.0);

  model::InverseWishartPrior iw{Eigen::Matrix2d::Identity() * 0.3, 4.0};
  const auto full = model::conditional_mniw_full_sigma_oracle(f, d, pr, iw);
  CHECK(full.nu_star == 16.0);
  CHECK((full.mu_star - params.mu_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((full.psi_star - (iw.psi + ref.s)).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd diff = full.psi_star - iw.psi;
  CHECK((diff - diff.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(diff).eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("flat priors and shape updates") {
  std::mt19937_64 rng(10);
  Eigen::MatrixXd x = oracle::gaussian(2000, 2, rng);
  x.col(0).setOnes();
  const Eigen::MatrixXd f = oracle::gaussian(2000, 2, rng);
  const Eigen::MatrixXd gamma = oracle::gaussian(4, 3, rng);
  Eigen::MatrixXd design(2000, 4);
  design << x, f;
  const model::Dataset d(x, design * gamma, spatial::LocationSet(oracle::uniform_sites(2000, rng)));
  model::PriorSpec pr;
  pr.b = Eigen::Vector3d(1.0, 2.0, 3.0);
  pr.kernels = {spatial::Kernel::exponential(4), spatial::Kernel::exponential(6)};
  const auto params = model::conditional_mniw_params(f, d, pr);
  CHECK(params.a_star == 1002.0);
  CHECK((params.b_star - pr.b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((params.mu_star - gamma).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd dup = f;
  dup.col(1) = x.col(1);
  CHECK_THROWS_WITH(model::conditional_mniw_params(dup, d, pr), doctest::Contains("unidentified regression/loadings"));
}

TEST_CASE("inverse-gamma draws have the right mean") {
  for (const auto [a, b, draws] : {std::tuple{1002.0, 500.5, 50000}, std::tuple{3.0, 2.0, 50000}}) {
    model::MNIWCondParams p;
    p.a_star = a;
    p.b_star = Eigen::VectorXd::Constant(1, b);
    Rng r(3);
    Eigen::VectorXd s(draws);
    for (int i = 0; i < draws; ++i) s[i] = model::sample_sigma2(p, r)[0];
    const double mean = s.mean();
    const double sd = std::sqrt((s.array() - mean).square().sum() / (draws - 1));
    CHECK(std::abs(mean - b / (a - 1.0)) < 3.0 * sd / std::sqrt(draws));
    CHECK((s.array() > 0.0).all());
  }
  model::MNIWCondParams p;
  p.a_star = 4.0;
  p.b_star = Eigen::Vector2d(1.0, 2.0);
  Rng r1(9), r2(9);
  CHECK(model::sample_sigma2(p, r1) == model::sample_sigma2(p, r2));
}

TEST_CASE("regression draws have the matrix-normal covariance") {
  std::mt19937_64 rng(11);
  model::MNIWCondParams p;
  p.p = 1;
  const Eigen::MatrixXd a = oracle::gaussian(2, 2, rng);
  const Eigen::MatrixXd prec = a * a.transpose() + Eigen::MatrixXd::Identity(2, 2);
  p.chol_vstar_inv = prec.llt().matrixL();
  p.mu_star = oracle::gaussian(2, 2, rng);
  const Eigen::Vector2d sigma2(0.5, 2.0);

  Rng r0(1);
  const auto mean_draw = model::sample_gamma(p, sigma2, r0, true);
  CHECK(mean_draw.beta == p.mu_star.topRows(1));
  CHECK(mean_draw.lambda == p.mu_star.bottomRows(1));

  const Eigen::MatrixXd v = prec.inverse();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 4);
  c.topLeftCorner(2, 2) = sigma2[0] * v;
  c.bottomRightCorner(2, 2) = sigma2[1] * v;
  const int draws = 50000;
  Eigen::MatrixXd samples(4, draws);
  Rng r(5);
  for (int i = 0; i < draws; ++i) {
    const auto g = model::sample_gamma(p, sigma2, r);
    Eigen::Matrix2d gm;
    gm << g.beta, g.lambda;
    samples.col(i) = Eigen::Map<const Eigen::Vector4d>(gm.data());
  }
  const Eigen::Vector4d mu = Eigen::Map<const Eigen::Vector4d>(p.mu_star.data());
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - mean;
  const Eigen::MatrixXd emp = centered * centered.transpose() / (draws - 1);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(std::abs(mean[i] - mu[i]) < 3.0 * std::sqrt(c(i, i) / draws));
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(emp(i, j) - c(i, j)) < 3.0 * cov_se(c, i, j, draws));
  }
}
