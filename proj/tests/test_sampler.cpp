#include "oracles.hpp"

#include "projmc2/chain_io.hpp"
#include "projmc2/diagnostics.hpp"
#include "projmc2/error.hpp"
#include "projmc2/sampler.hpp"
#include "projmc2/simgen.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace projmc2;

namespace {

struct Tiny {
  model::Dataset data;
  model::PriorSpec priors;
  std::vector<nngp::NNGPFactor> factors;
};

Tiny tiny(std::size_t n, std::size_t k, std::uint64_t seed) {
  auto spec = simgen::default_spec();
  spec.n = n;
  spec.seed = seed;
  spec.k = k;
  spec.true_lambda.conservativeResize(static_cast<Eigen::Index>(k), Eigen::NoChange);
  spec.true_phi.conservativeResize(static_cast<Eigen::Index>(k));
  spec.prior_phi.conservativeResize(static_cast<Eigen::Index>(k));
  auto sim = simgen::simulate(spec);
  model::PriorSpec pr;
  pr.b = Eigen::VectorXd::Ones(10);
  for (Eigen::Index j = 0; j < spec.prior_phi.size(); ++j) pr.kernels.push_back(spatial::Kernel::exponential(spec.prior_phi[j]));
  auto factors = sampler::build_factors(sim.data, pr);
  return {std::move(sim.data), pr, std::move(factors)};
}

sampler::RunConfig config(std::size_t iterations, std::size_t warmup, std::size_t k, std::uint64_t seed) {
  sampler::RunConfig c;
  c.iterations = iterations;
  c.warmup = warmup;
  c.k = k;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("run configuration validation") {
  auto c = config(10, 0, 2, 1);
  CHECK_NOTHROW(c.validate());
  c.warmup = 10;
  CHECK_THROWS_AS(c.validate(), Error);
  c.warmup = 0;
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.thin = 3;
  CHECK(c.retained() == 3);
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(sampler::parse_algorithm("GibbsPost") == sampler::Algorithm::GibbsPost);
  CHECK_THROWS_AS(sampler::parse_algorithm("gibbs"), Error);
}

TEST_CASE("initialization recovers exact regression and rank-one residuals") {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd x = oracle::gaussian(40, 2, rng);
  x.col(0).setOnes();
  const Eigen::MatrixXd beta = oracle::gaussian(2, 5, rng);
  const spatial::LocationSet locs(oracle::uniform_sites(40, rng));
  const model::Dataset exact(x, x * beta, locs);
  const auto s = sampler::initialize_state(exact, 1, 3);
  CHECK((s.beta - beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(s.f_tilde.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.sigma2.array() > 0.0).all());

  Eigen::VectorXd u = oracle::gaussian(40, 1, rng);
  u -= x * x.colPivHouseholderQr().solve(u);  // keep u out of the column space of X
  const Eigen::VectorXd v = oracle::gaussian(5, 1, rng);
  const model::Dataset rank1(x, x * beta + u * v.transpose(), locs);
  const auto r = sampler::initialize_state(rank1, 1, 3);
  const double cos_f = std::abs(r.f_tilde.col(0).dot(u)) / (r.f_tilde.col(0).norm() * u.norm());
  const double cos_l = std::abs(r.lambda.row(0).dot(v.transpose())) / (r.lambda.row(0).norm() * v.norm());
  CHECK(cos_f == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(cos_l == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((r.f_tilde * r.lambda - u * v.transpose()).cwiseAbs().maxCoeff() < 1e-9);

  const auto again = sampler::initialize_state(rank1, 1, 3);
  CHECK(again.f_tilde == r.f_tilde);
  CHECK(again.lambda == r.lambda);
}

TEST_CASE("projected chains satisfy the projection invariants") {
  const auto t = tiny(60, 2, 5);
  const auto chains = sampler::run_projmc2(t.data, t.priors, config(10, 0, 2, 7), t.factors);
  REQUIRE(chains.draws() == 10);
  for (std::size_t d = 0; d < 10; ++d) {
    const Eigen::MatrixXd f = chains.ftilde.get(d);
    CHECK(f.colwise().mean().cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.transpose() * f - 60.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((chains.sigma2.get(d).array() > 0.0).all());
  }
  CHECK(chains.intercept_row == 0);
}

TEST_CASE("blocked Gibbs smoke run, thinning and determinism") {
  const auto t = tiny(50, 2, 6);
  auto cfg = config(10, 0, 2, 3);
  const auto a = sampler::run_blocked_gibbs(t.data, t.priors, cfg, t.factors);
  CHECK(a.draws() == 10);
  CHECK(a.algorithm == sampler::Algorithm::Gibbs);
  const auto b = sampler::run_blocked_gibbs(t.data, t.priors, cfg, t.factors);
  for (std::size_t i = 0; i < a.blocks().size(); ++i) CHECK(a.blocks()[i]->data == b.blocks()[i]->data);

  cfg.iterations = 25;
  cfg.warmup = 5;
  cfg.thin = 3;
  const auto thinned = sampler::run_blocked_gibbs(t.data, t.priors, cfg, t.factors);
  CHECK(thinned.draws() == 6);

  cfg.seed = 4;
  const auto c = sampler::run_blocked_gibbs(t.data, t.priors, config(10, 0, 2, 4), t.factors);
  CHECK(c.beta.data != a.beta.data);
}

TEST_CASE("results do not depend on NNGP build workers") {
  const auto t = tiny(600, 2, 8);
  const auto threaded = sampler::build_factors(t.data, t.priors, 3);
  const auto cfg = config(3, 0, 2, 1);
  const auto a = sampler::run_projmc2(t.data, t.priors, cfg, t.factors);
  const auto b = sampler::run_projmc2(t.data, t.priors, cfg, threaded);
  CHECK(a.ftilde.data == b.ftilde.data);
  CHECK(a.beta.data == b.beta.data);
}

TEST_CASE("mismatched K is rejected") {
  const auto t = tiny(30, 2, 9);
  CHECK_THROWS_AS(sampler::run_projmc2(t.data, t.priors, config(5, 0, 1, 1), t.factors), Error);
}

TEST_CASE("post-centering preserves fitted values") {
  const auto t = tiny(40, 2, 10);
  const auto raw = sampler::run_blocked_gibbs(t.data, t.priors, config(20, 0, 2, 2), t.factors);
  const auto post = sampler::post_center(raw);
  CHECK(post.algorithm == sampler::Algorithm::GibbsPost);
  for (std::size_t d = 0; d < raw.draws(); ++d) {
    const Eigen::MatrixXd before = t.data.x() * raw.beta.get(d) + raw.ftilde.get(d) * raw.lambda.get(d);
    const Eigen::MatrixXd after = t.data.x() * post.beta.get(d) + post.ftilde.get(d) * post.lambda.get(d);
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(post.ftilde.get(d).colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::RowVectorXd shift = raw.ftilde.get(d).colwise().mean() * raw.lambda.get(d);
    CHECK((post.beta.get(d).row(0) - raw.beta.get(d).row(0) - shift).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto twice = sampler::post_center(post);
  CHECK((Eigen::Map<const Eigen::VectorXd>(twice.beta.data.data(), static_cast<Eigen::Index>(twice.beta.data.size())) -
         Eigen::Map<const Eigen::VectorXd>(post.beta.data.data(), static_cast<Eigen::Index>(post.beta.data.size())))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  auto no_intercept = raw;
  no_intercept.intercept_row.reset();
  CHECK_THROWS_AS(sampler::post_center(no_intercept), Error);
}

TEST_CASE("projected chains from different starts agree in distribution") {
  const auto t = tiny(30, 1, 12);
  const auto cfg1 = config(3000, 500, 1, 21);
  auto init = sampler::initialize_state(t.data, 1, 99);
  init.lambda = -3.0 * init.lambda;
  init.beta.setZero();
  init.sigma2.setConstant(5.0);
  const auto a = sampler::run_projmc2(t.data, t.priors, cfg1, t.factors);
  const auto b = sampler::run_projmc2(t.data, t.priors, config(3000, 500, 1, 22), t.factors, &init);

  const auto fitted = [](const sampler::ChainStore& c) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(c.draws()), 30 * 10);
    for (std::size_t d = 0; d < c.draws(); ++d) {
      const Eigen::MatrixXd m = c.ftilde.get(d) * c.lambda.get(d);
      out.row(static_cast<Eigen::Index>(d)) = Eigen::Map<const Eigen::RowVectorXd>(m.data(), m.size());
    }
    return out;
  };
  const Eigen::MatrixXd fa = fitted(a), fb = fitted(b);
  int outside = 0;
  for (Eigen::Index j = 0; j < fa.cols(); ++j) {
    const auto se2 = [](const Eigen::VectorXd& x) {
      const double var = (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
      return var / diagnostics::effective_sample_size(x);
    };
    const Eigen::VectorXd xa = fa.col(j), xb = fb.col(j);
    if (std::abs(xa.mean() - xb.mean()) > 4.0 * std::sqrt(se2(xa) + se2(xb))) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("chain directory round trip and corruption checks") {
  const auto t = tiny(25, 2, 13);
  const auto chains = sampler::run_blocked_gibbs(t.data, t.priors, config(6, 1, 2, 5), t.factors);
  const auto dir = std::filesystem::temp_directory_path() / "projmc2_roundtrip";
  std::filesystem::remove_all(dir);
  chain_io::write_chain(dir, chains);
  const auto back = chain_io::read_chain(dir);
  CHECK(back.algorithm == chains.algorithm);
  CHECK(back.intercept_row == chains.intercept_row);
  CHECK(back.config.seed == 5);
  CHECK(back.config.warmup == 1);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.blocks()[i]->data == chains.blocks()[i]->data);
    CHECK(back.blocks()[i]->rows == chains.blocks()[i]->rows);
  }
  CHECK(std::filesystem::file_size(dir / "beta.bin") == 5 * 2 * 10 * 8);

  std::filesystem::resize_file(dir / "lambda.bin", 16);
  CHECK_THROWS_WITH(chain_io::read_chain(dir), doctest::Contains("corrupt binary"));
  std::filesystem::remove_all(dir);
}
