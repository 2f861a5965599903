#include "projmc2/sampler.hpp"

#include "projmc2/error.hpp"
#include "projmc2/random.hpp"

#include <algorithm>
#include <chrono>
#include <string>

namespace projmc2::sampler {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::ProjMC2: return "ProjMC2";
    case Algorithm::Gibbs: return "Gibbs";
    case Algorithm::GibbsPost: return "GibbsPost";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "ProjMC2") return Algorithm::ProjMC2;
  if (name == "Gibbs") return Algorithm::Gibbs;
  if (name == "GibbsPost") return Algorithm::GibbsPost;
  throw Error(ErrorCode::Config, "unknown algorithm '" + std::string(name) + "' (expected ProjMC2, Gibbs or GibbsPost)");
}

void RunConfig::validate() const {
  if (iterations == 0) throw Error(ErrorCode::Config, "iterations must be positive");
  if (warmup >= iterations) throw Error(ErrorCode::Config, "warmup must be smaller than iterations");
  if (thin == 0) throw Error(ErrorCode::Config, "thin must be at least 1");
  if (k == 0) throw Error(ErrorCode::Config, "K must be at least 1");
  if (retained() == 0) throw Error(ErrorCode::Config, "no draws would be retained with this warmup and thin");
}

Block::Block(std::string name_, std::size_t draws, std::size_t rows_, std::size_t cols_)
    : name(std::move(name_)), rows(rows_), cols(cols_), data(draws * rows_ * cols_, 0.0) {}

Eigen::MatrixXd Block::get(std::size_t draw) const {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(data.data() + draw * stride(), static_cast<Eigen::Index>(rows),
                                    static_cast<Eigen::Index>(cols));
}

void Block::set(std::size_t draw, const Eigen::MatrixXd& value) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (static_cast<std::size_t>(value.rows()) != rows || static_cast<std::size_t>(value.cols()) != cols) {
    throw Error(ErrorCode::DimensionMismatch, "block " + name + " expects " + std::to_string(rows) + "x" +
                                                  std::to_string(cols) + " draws");
  }
  Eigen::Map<RowMajor>(data.data() + draw * stride(), value.rows(), value.cols()) = value;
}

Eigen::VectorXd Block::series(std::size_t r, std::size_t c) const {
  const std::size_t d = draws();
  Eigen::VectorXd out(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) out[static_cast<Eigen::Index>(i)] = data[i * stride() + r * cols + c];
  return out;
}

model::ModelState initialize_state(const model::Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k == 0 || static_cast<Eigen::Index>(k) > std::min(data.n(), data.q())) {
    throw Error(ErrorCode::InvalidArgument, "K must be between 1 and min(n, q)");
  }
  model::ModelState s;
  s.beta = data.x().colPivHouseholderQr().solve(data.y());
  const Eigen::MatrixXd resid = data.y() - data.x() * s.beta;
  const auto svd = linalg::randomized_svd(resid, static_cast<Eigen::Index>(k), 10, 2, seed);
  s.f_tilde = svd.u * svd.s.asDiagonal();
  s.lambda = svd.v.transpose();
  const Eigen::RowVectorXd mean = resid.colwise().mean();
  const double denom = static_cast<double>(std::max<Eigen::Index>(data.n() - 1, 1));
  s.sigma2 = ((resid.rowwise() - mean).colwise().squaredNorm() / denom).transpose();
  s.sigma2 = s.sigma2.cwiseMax(1e-10);
  return s;
}

std::vector<nngp::NNGPFactor> build_factors(const model::Dataset& data, const model::PriorSpec& priors,
                                            unsigned workers) {
  const auto ord = spatial::maximin_order(data.locs());
  const auto nbrs = spatial::predecessor_neighbors(data.locs(), ord, priors.m);
  std::vector<nngp::NNGPFactor> out;
  out.reserve(priors.kernels.size());
  for (const auto& kernel : priors.kernels) out.push_back(nngp::build_nngp_factor(data.locs(), ord, nbrs, kernel, workers));
  return out;
}

namespace {

void check_inputs(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                  const std::vector<nngp::NNGPFactor>& factors, const model::ModelState& state) {
  cfg.validate();
  priors.validate(data.p(), data.q());
  if (priors.num_factors() != cfg.k || factors.size() != cfg.k) {
    throw Error(ErrorCode::DimensionMismatch, "K = " + std::to_string(cfg.k) + " but priors name " +
                                                  std::to_string(priors.num_factors()) + " kernels and " +
                                                  std::to_string(factors.size()) + " factors were built");
  }
  const auto k = static_cast<Eigen::Index>(cfg.k);
  if (state.beta.rows() != data.p() || state.beta.cols() != data.q() || state.lambda.rows() != k ||
      state.lambda.cols() != data.q() || state.sigma2.size() != data.q() || state.f_tilde.rows() != data.n() ||
      state.f_tilde.cols() != k) {
    throw Error(ErrorCode::DimensionMismatch, "initial state does not match data dimensions and K");
  }
}

ChainStore run_loop(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                    const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init,
                    const IterationCallback& on_iteration, bool project) {
  const auto start = std::chrono::steady_clock::now();
  model::ModelState state = init != nullptr ? *init : initialize_state(data, cfg.k, cfg.seed + cfg.chain);
  check_inputs(data, priors, cfg, factors, state);

  Rng rng_f = make_stream(cfg.seed, Stream::FactorNoise, cfg.chain);
  Rng rng_s = make_stream(cfg.seed, Stream::Sigma2, cfg.chain);
  Rng rng_g = make_stream(cfg.seed, Stream::Gamma, cfg.chain);

  const auto n = static_cast<std::size_t>(data.n());
  const auto p = static_cast<std::size_t>(data.p());
  const auto q = static_cast<std::size_t>(data.q());
  const std::size_t keep = cfg.retained();

  ChainStore out;
  out.config = cfg;
  out.algorithm = project ? Algorithm::ProjMC2 : Algorithm::Gibbs;
  out.config.algorithm = out.algorithm;
  if (auto c = data.intercept_column()) out.intercept_row = static_cast<std::size_t>(*c);
  out.ftilde = Block("ftilde", keep, n, cfg.k);
  out.beta = Block("beta", keep, p, q);
  out.lambda = Block("lambda", keep, cfg.k, q);
  out.sigma2 = Block("sigma2", keep, q, 1);

  model::FactorDrawOptions fopts;
  fopts.lsmr = cfg.lsmr;
  std::size_t stored = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationInfo info;
    info.iteration = it;
    try {
      const auto system = model::build_factor_system(state, data, factors);
      auto draw = model::sample_F(system, rng_f, fopts, &state.f_tilde);
      info.lsmr_iterations = draw.solve.iterations;
      info.lsmr_stop = draw.solve.stop;
      if (draw.solve.hit_iteration_limit()) ++out.lsmr_warnings;
      state.f_tilde = project ? model::project_g(draw.f) : std::move(draw.f);
      const auto params = model::conditional_mniw_params(state.f_tilde, data, priors);
      state.sigma2 = model::sample_sigma2(params, rng_s);
      auto gamma = model::sample_gamma(params, state.sigma2, rng_g);
      state.beta = std::move(gamma.beta);
      state.lambda = std::move(gamma.lambda);
    } catch (const Error& e) {
      throw Error(e.code(), "iteration " + std::to_string(it) + ": " + e.what());
    }

    if (it >= cfg.warmup && (it - cfg.warmup + 1) % cfg.thin == 0 && stored < keep) {
      out.ftilde.set(stored, state.f_tilde);
      out.beta.set(stored, state.beta);
      out.lambda.set(stored, state.lambda);
      out.sigma2.set(stored, state.sigma2);
      ++stored;
    }
    info.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_iteration) on_iteration(info);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

ChainStore run_projmc2(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                       const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init,
                       const IterationCallback& on_iteration) {
  return run_loop(data, priors, cfg, factors, init, on_iteration, true);
}

ChainStore run_blocked_gibbs(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
                             const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init,
                             const IterationCallback& on_iteration) {
  return run_loop(data, priors, cfg, factors, init, on_iteration, false);
}

ChainStore run(const model::Dataset& data, const model::PriorSpec& priors, const RunConfig& cfg,
               const std::vector<nngp::NNGPFactor>& factors, const model::ModelState* init,
               const IterationCallback& on_iteration) {
  switch (cfg.algorithm) {
    case Algorithm::ProjMC2: return run_projmc2(data, priors, cfg, factors, init, on_iteration);
    case Algorithm::Gibbs: return run_blocked_gibbs(data, priors, cfg, factors, init, on_iteration);
    case Algorithm::GibbsPost: {
      auto chains = post_center(run_blocked_gibbs(data, priors, cfg, factors, init, on_iteration));
      chains.config.algorithm = Algorithm::GibbsPost;
      return chains;
    }
  }
  throw Error(ErrorCode::Config, "unknown algorithm");
}

ChainStore post_center(const ChainStore& chains) {
  if (chains.algorithm == Algorithm::ProjMC2) {
    throw Error(ErrorCode::InvalidArgument, "post_center expects raw-factor chains, got ProjMC2 chains");
  }
  if (!chains.intercept_row) {
    throw Error(ErrorCode::InvalidArgument, "post_center needs an intercept column in X to absorb factor means");
  }
  ChainStore out = chains;
  out.algorithm = Algorithm::GibbsPost;
  out.config.algorithm = Algorithm::GibbsPost;
  const auto row = static_cast<Eigen::Index>(*chains.intercept_row);
  for (std::size_t d = 0; d < chains.draws(); ++d) {
    Eigen::MatrixXd f = chains.ftilde.get(d);
    Eigen::MatrixXd beta = chains.beta.get(d);
    const Eigen::RowVectorXd fbar = f.colwise().mean();
    f.rowwise() -= fbar;
    beta.row(row) += fbar * chains.lambda.get(d);
    out.ftilde.set(d, f);
    out.beta.set(d, beta);
  }
  return out;
}

}  // namespace projmc2::sampler
