#include "commands.hpp"

#include "projmc2/chain_io.hpp"
#include "projmc2/csv.hpp"
#include "projmc2/diagnostics.hpp"
#include "projmc2/error.hpp"
#include "projmc2/sampler.hpp"
#include "projmc2/simgen.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace projmc2::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void save_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
}

/// Typed access to a JSON object that rejects unknown keys up front.
class Config {
 public:
  Config(const json& j, std::string where, const std::set<std::string>& allowed) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorCode::Config, where_ + ": configuration must be a JSON object");
    for (const auto& [key, _] : j_.items()) {
      if (!allowed.count(key)) throw Error(ErrorCode::Config, where_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return as<T>(j_.at(key), key);
  }

  template <class T>
  T as(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_unsigned()) throw Error(ErrorCode::Config, bad(key, "a non-negative integer"));
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error(ErrorCode::Config, bad(key, "a number"));
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw Error(ErrorCode::Config, bad(key, "a string"));
      }
      return v.get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::Config, bad(key, "a different type"));
    }
  }

  Eigen::VectorXd vector(const std::string& key) const {
    const json& v = j_.at(key);
    if (!v.is_array()) throw Error(ErrorCode::Config, bad(key, "an array of numbers"));
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = as<double>(v[i], key);
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key) const { return to_matrix(j_.at(key), key); }

  Eigen::MatrixXd to_matrix(const json& v, const std::string& key) const {
    if (!v.is_array() || v.empty() || !v[0].is_array()) throw Error(ErrorCode::Config, bad(key, "an array of rows"));
    const std::size_t cols = v[0].size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (!v[r].is_array() || v[r].size() != cols) throw Error(ErrorCode::Config, bad(key, "a rectangular matrix"));
      for (std::size_t c = 0; c < cols; ++c)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as<double>(v[r][c], key);
    }
    return out;
  }

 private:
  std::string bad(const std::string& key, const std::string& what) const {
    return where_ + ": key '" + key + "' must be " + what;
  }

  const json& j_;
  std::string where_;
};

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

// ---------------------------------------------------------------- simulate

simgen::SimSpec read_sim_spec(const json& j, const std::string& where) {
  const Config cfg(j, where,
                   {"n", "q", "p", "K", "seed", "true_beta", "true_lambda", "true_sigma2", "true_phi", "prior_phi"});
  simgen::SimSpec s = simgen::default_spec();
  s.n = cfg.get<std::size_t>("n", s.n);
  s.q = cfg.get<std::size_t>("q", s.q);
  s.p = cfg.get<std::size_t>("p", s.p);
  s.k = cfg.get<std::size_t>("K", s.k);
  s.seed = cfg.get<std::uint64_t>("seed", s.seed);
  if (cfg.has("true_beta")) s.true_beta = cfg.matrix("true_beta");
  if (cfg.has("true_lambda")) s.true_lambda = cfg.matrix("true_lambda");
  if (cfg.has("true_sigma2")) s.true_sigma2 = cfg.vector("true_sigma2");
  if (cfg.has("true_phi")) s.true_phi = cfg.vector("true_phi");
  if (cfg.has("prior_phi")) s.prior_phi = cfg.vector("prior_phi");
  return s;
}

json sim_spec_json(const simgen::SimSpec& s) {
  return {{"n", s.n},
          {"q", s.q},
          {"p", s.p},
          {"K", s.k},
          {"seed", s.seed},
          {"true_beta", to_json(s.true_beta)},
          {"true_lambda", to_json(s.true_lambda)},
          {"true_sigma2", to_json(s.true_sigma2)},
          {"true_phi", to_json(s.true_phi)},
          {"prior_phi", to_json(s.prior_phi)}};
}

// ---------------------------------------------------------------- fit

struct FitPlan {
  fs::path data;
  sampler::RunConfig run;
  model::PriorSpec priors;
  unsigned workers = 1;
  std::size_t chains = 1;
  json resolved;
};

std::optional<model::MatrixNormalPrior> read_mn_prior(const Config& cfg, const std::string& key) {
  if (!cfg.has(key)) return std::nullopt;
  const json& v = cfg.raw(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "flat") return std::nullopt;
    throw Error(ErrorCode::Config, "key '" + key + "' must be \"flat\" or an object with mean and row_cov");
  }
  const Config sub(v, key, {"mean", "row_cov"});
  if (!sub.has("mean") || !sub.has("row_cov")) throw Error(ErrorCode::Config, "key '" + key + "' needs mean and row_cov");
  return model::MatrixNormalPrior{sub.matrix("mean"), sub.matrix("row_cov")};
}

json mn_prior_json(const std::optional<model::MatrixNormalPrior>& p) {
  if (!p) return "flat";
  return {{"mean", to_json(p->mean)}, {"row_cov", to_json(p->row_cov)}};
}

FitPlan read_fit_plan(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  const json j = load_json(path);
  const std::string where = path.string();
  const Config cfg(j, where,
                   {"data", "algorithm", "iterations", "warmup", "thin", "seed", "K", "m", "prior_phi", "a", "b",
                    "beta_prior", "lambda_prior", "lsmr", "workers", "chains"});
  FitPlan plan;
  if (!cfg.has("data")) throw Error(ErrorCode::Config, where + ": missing key 'data'");
  plan.data = cfg.as<std::string>(cfg.raw("data"), "data");
  if (plan.data.is_relative()) plan.data = fs::absolute(path).parent_path() / plan.data;
  plan.data = plan.data.lexically_normal();

  auto& run = plan.run;
  run.algorithm = sampler::parse_algorithm(cfg.get<std::string>("algorithm", "ProjMC2"));
  run.iterations = cfg.get<std::size_t>("iterations", run.iterations);
  run.warmup = cfg.get<std::size_t>("warmup", run.warmup);
  run.thin = cfg.get<std::size_t>("thin", run.thin);
  run.seed = seed_override ? *seed_override : cfg.get<std::uint64_t>("seed", run.seed);

  Eigen::VectorXd phi;
  if (cfg.has("prior_phi")) {
    phi = cfg.vector("prior_phi");
  } else if (fs::exists(plan.data / "truth.json")) {
    const json truth = load_json(plan.data / "truth.json");
    phi = Config(truth, "truth.json", {"n", "q", "p", "K", "seed", "true_phi", "prior_phi", "beta", "lambda", "sigma2", "F"})
              .vector("prior_phi");
  } else {
    throw Error(ErrorCode::Config, where + ": missing key 'prior_phi' and no truth.json next to the data");
  }
  run.k = cfg.get<std::size_t>("K", static_cast<std::size_t>(phi.size()));
  if (static_cast<std::size_t>(phi.size()) != run.k) {
    throw Error(ErrorCode::Config, where + ": key 'prior_phi' has " + std::to_string(phi.size()) +
                                       " entries but K = " + std::to_string(run.k));
  }
  if (cfg.has("lsmr")) {
    const Config l(cfg.raw("lsmr"), where + ": lsmr", {"atol", "btol", "max_iter"});
    run.lsmr.atol = l.get<double>("atol", run.lsmr.atol);
    run.lsmr.btol = l.get<double>("btol", run.lsmr.btol);
    run.lsmr.max_iter = static_cast<Eigen::Index>(l.get<std::size_t>("max_iter", 0));
  }
  try {
    run.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, where + ": " + e.what());
  }

  auto& pr = plan.priors;
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    try {
      pr.kernels.push_back(spatial::Kernel::exponential(phi[k]));
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, where + ": key 'prior_phi': " + e.what());
    }
  }
  pr.m = cfg.get<std::size_t>("m", pr.m);
  pr.a = cfg.get<double>("a", pr.a);
  if (cfg.has("b") && cfg.raw("b").is_array()) {
    pr.b = cfg.vector("b");
  } else {
    pr.b = Eigen::VectorXd::Constant(1, cfg.get<double>("b", 1.0));  // broadcast once q is known
  }
  pr.beta = read_mn_prior(cfg, "beta_prior");
  pr.lambda = read_mn_prior(cfg, "lambda_prior");
  plan.workers = static_cast<unsigned>(cfg.get<std::size_t>("workers", 1));
  plan.chains = cfg.get<std::size_t>("chains", 1);
  if (plan.workers == 0 || plan.chains == 0) throw Error(ErrorCode::Config, where + ": workers and chains must be positive");
  return plan;
}

model::Dataset load_dataset(const fs::path& dir) {
  const auto locs = csv::read_numeric(dir / "locations.csv");
  const auto x = csv::read_numeric(dir / "X.csv");
  const auto y = csv::read_numeric(dir / "Y.csv");
  if (x.values.rows() != y.values.rows() || locs.values.rows() != y.values.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "row counts in " + dir.string() + " differ: locations " +
                                                  std::to_string(locs.values.rows()) + ", X " +
                                                  std::to_string(x.values.rows()) + ", Y " +
                                                  std::to_string(y.values.rows()));
  }
  return model::Dataset(x.values, y.values, spatial::LocationSet(locs.values));
}

json resolved_fit_json(const FitPlan& plan) {
  const auto& r = plan.run;
  json phi = json::array();
  for (const auto& k : plan.priors.kernels) phi.push_back(k.decay);
  return {{"data", plan.data.string()},
          {"algorithm", std::string(sampler::to_string(r.algorithm))},
          {"iterations", r.iterations},
          {"warmup", r.warmup},
          {"thin", r.thin},
          {"seed", r.seed},
          {"K", r.k},
          {"m", plan.priors.m},
          {"prior_phi", phi},
          {"a", plan.priors.a},
          {"b", to_json(plan.priors.b)},
          {"beta_prior", mn_prior_json(plan.priors.beta)},
          {"lambda_prior", mn_prior_json(plan.priors.lambda)},
          {"lsmr", {{"atol", r.lsmr.atol}, {"btol", r.lsmr.btol}, {"max_iter", r.lsmr.max_iter}}},
          {"workers", plan.workers},
          {"chains", plan.chains}};
}

void run_one_chain(const FitPlan& plan, const model::Dataset& data, const std::vector<nngp::NNGPFactor>& factors,
                   std::uint32_t chain, const fs::path& dir) {
  make_dir(dir);
  std::ofstream log(dir / "run.log");
  if (!log) throw Error(ErrorCode::Io, "cannot write " + (dir / "run.log").string());
  sampler::RunConfig run = plan.run;
  run.chain = chain;
  log << "algorithm=" << sampler::to_string(run.algorithm) << " seed=" << run.seed << " chain=" << chain
      << " iterations=" << run.iterations << " warmup=" << run.warmup << " thin=" << run.thin << '\n';
  log << "iteration,lsmr_iterations,lsmr_stop,seconds\n";
  std::size_t warnings = 0;
  const auto chains = sampler::run(data, plan.priors, run, factors, nullptr, [&](const sampler::IterationInfo& info) {
    log << info.iteration << ',' << info.lsmr_iterations << ',' << linalg::to_string(info.lsmr_stop) << ','
        << std::setprecision(6) << info.seconds << '\n';
    if (info.lsmr_stop == linalg::LsmrStop::IterationLimit) {
      ++warnings;
      log << "warning: LSMR hit its iteration limit at iteration " << info.iteration << '\n';
    }
  });
  chain_io::write_chain(dir, chains);
  json resolved = plan.resolved;
  resolved["chain"] = chain;
  save_json(dir / "config.resolved.json", resolved);
  log << "done wall_seconds=" << chains.wall_seconds << " lsmr_warnings=" << warnings
      << " retained=" << chains.draws() << '\n';
}

// ---------------------------------------------------------------- diagnose

std::vector<std::string> table_blocks(const sampler::ChainStore& c) {
  if (c.intercept_row) return {"beta0", "beta1", "lambda", "f", "sigma2"};
  return {"beta", "lambda", "f", "sigma2"};
}

}  // namespace

void cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  simgen::SimSpec spec =
      args.config ? read_sim_spec(load_json(*args.config), args.config->string()) : simgen::default_spec();
  if (args.seed) spec.seed = *args.seed;
  spec.validate();
  make_dir(args.out);
  const auto sim = simgen::simulate(spec);
  const auto& d = sim.data;
  csv::write_numeric(args.out / "locations.csv", {"s1", "s2"}, d.locs().coords());
  csv::write_numeric(args.out / "X.csv", csv::numbered("x", d.p()), d.x());
  csv::write_numeric(args.out / "Y.csv", csv::numbered("y", d.q()), d.y());
  json truth = {{"n", spec.n},
                {"q", spec.q},
                {"p", spec.p},
                {"K", spec.k},
                {"seed", spec.seed},
                {"true_phi", to_json(spec.true_phi)},
                {"prior_phi", to_json(spec.prior_phi)},
                {"beta", to_json(sim.truth.beta)},
                {"lambda", to_json(sim.truth.lambda)},
                {"sigma2", to_json(sim.truth.sigma2)},
                {"F", to_json(sim.truth.f)}};
  save_json(args.out / "truth.json", truth);
  save_json(args.out / "config.resolved.json", sim_spec_json(spec));
  log << "simulated n=" << spec.n << " q=" << spec.q << " K=" << spec.k << " seed=" << spec.seed << " -> "
      << args.out.string() << '\n';
}

void cmd_fit(const FitArgs& args, std::ostream& log) {
  FitPlan plan = read_fit_plan(args.config, args.seed);
  const model::Dataset data = load_dataset(plan.data);
  if (plan.priors.b.size() == 1 && data.q() != 1) plan.priors.b = Eigen::VectorXd::Constant(data.q(), plan.priors.b[0]);
  try {
    plan.priors.validate(data.p(), data.q());
  } catch (const Error& e) {
    throw Error(e.code() == ErrorCode::DimensionMismatch ? e.code() : ErrorCode::Config,
                args.config.string() + ": " + e.what());
  }
  plan.resolved = resolved_fit_json(plan);
  const auto factors = sampler::build_factors(data, plan.priors, plan.workers);

  make_dir(args.out);
  if (plan.chains == 1) {
    run_one_chain(plan, data, factors, 0, args.out);
  } else {
    std::vector<std::string> errors(plan.chains);
    {
      std::vector<std::jthread> pool;
      for (std::size_t c = 0; c < plan.chains; ++c) {
        pool.emplace_back([&, c] {
          try {
            run_one_chain(plan, data, factors, static_cast<std::uint32_t>(c), args.out / ("chain_" + std::to_string(c)));
          } catch (const std::exception& e) {
            errors[c] = e.what();
          }
        });
      }
    }
    for (std::size_t c = 0; c < plan.chains; ++c)
      if (!errors[c].empty()) throw Error(ErrorCode::Numerical, "chain " + std::to_string(c) + ": " + errors[c]);
  }
  save_json(args.out / "config.resolved.json", plan.resolved);
  log << "fit " << sampler::to_string(plan.run.algorithm) << " n=" << data.n() << " q=" << data.q()
      << " K=" << plan.run.k << " iterations=" << plan.run.iterations << " chains=" << plan.chains << " -> "
      << args.out.string() << '\n';
}

void cmd_diagnose(const DiagnoseArgs& args, std::ostream& log) {
  const auto raw = chain_io::read_chain(args.chain);
  const auto chains = diagnostics::align_signs(raw);
  const fs::path out = args.out ? *args.out : args.chain;
  make_dir(out);

  const auto report = diagnostics::ess_report(chains, table_blocks(chains));
  diagnostics::write_ess_csv(out / "ess.csv", report);
  diagnostics::write_traces_csv(out / "traces.csv", chains);

  json resolved = {{"chain", fs::absolute(args.chain).lexically_normal().string()}, {"truth", nullptr}};
  if (args.truth) {
    const json truth = load_json(*args.truth);
    if (!truth.contains("F")) throw Error(ErrorCode::Parse, args.truth->string() + ": missing key 'F'");
    const Config cfg(truth, args.truth->string(),
                     {"n", "q", "p", "K", "seed", "true_phi", "prior_phi", "beta", "lambda", "sigma2", "F"});
    const Eigen::MatrixXd f = cfg.matrix("F");
    if (static_cast<std::size_t>(f.cols()) != chains.ftilde.cols) {
      throw Error(ErrorCode::DimensionMismatch, "truth has K = " + std::to_string(f.cols()) + ", expected K = " +
                                                    std::to_string(chains.ftilde.cols) + " from the chain");
    }
    const auto mode = chains.algorithm == sampler::Algorithm::ProjMC2 ? diagnostics::RecoveryMode::Stiefel
                                                                      : diagnostics::RecoveryMode::Sphere;
    const auto metrics = diagnostics::factor_recovery_metrics(f, chains, mode);
    diagnostics::write_factor_metrics_csv(out / "factor_metrics.csv", metrics, mode);
    resolved["truth"] = fs::absolute(*args.truth).lexically_normal().string();
  }
  save_json(out / "diagnose.resolved.json", resolved);

  log << "diagnosed " << sampler::to_string(chains.algorithm) << " draws=" << chains.draws() << " -> "
      << out.string() << '\n';
  for (const auto& b : report.blocks) {
    log << "  " << std::left << std::setw(7) << b.block << " min=" << std::setprecision(4) << b.min
        << " mean=" << b.mean << " median=" << b.median << " below100=" << b.frac_below_100 << '\n';
  }
}

void cmd_compare(const CompareArgs& args, std::ostream& log) {
  if (args.runs.size() < 2) throw Error(ErrorCode::InvalidArgument, "need >= 2 runs to compare");
  std::vector<sampler::ChainStore> runs;
  for (const auto& dir : args.runs) runs.push_back(diagnostics::align_signs(chain_io::read_chain(dir)));

  const auto shape = [](const sampler::ChainStore& c) {
    std::ostringstream s;
    s << "beta " << c.beta.rows << "x" << c.beta.cols << ", lambda " << c.lambda.rows << "x" << c.lambda.cols
      << ", F " << c.ftilde.rows << "x" << c.ftilde.cols;
    return s.str();
  };
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (shape(runs[i]) != shape(runs[0]) || runs[i].intercept_row != runs[0].intercept_row) {
      throw Error(ErrorCode::DimensionMismatch, "shape mismatch: " + args.runs[0].string() + " has " + shape(runs[0]) +
                                                    ", " + args.runs[i].string() + " has " + shape(runs[i]));
    }
  }

  const auto blocks = table_blocks(runs[0]);
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& r : runs) {
    std::string label(sampler::to_string(r.algorithm));
    if (const int n = ++seen[label]; n > 1) label += "_" + std::to_string(n);
    labels.push_back(label);
  }
  std::vector<diagnostics::ESSReport> reports;
  for (const auto& r : runs) reports.push_back(diagnostics::ess_report(r, blocks));

  make_dir(args.out);
  const fs::path path = args.out / "compare.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "block";
  for (const auto& l : labels) out << ',' << l << "_min," << l << "_mean," << l << "_median," << l << "_pct_below_100";
  out << '\n';
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out << blocks[b];
    for (const auto& rep : reports) {
      const auto& e = rep.blocks[b];
      out << ',' << csv::format_double(e.min) << ',' << csv::format_double(e.mean) << ','
          << csv::format_double(e.median) << ',' << csv::format_double(100.0 * e.frac_below_100);
    }
    out << '\n';
  }
  json resolved = {{"runs", json::array()}};
  for (const auto& r : args.runs) resolved["runs"].push_back(fs::absolute(r).lexically_normal().string());
  save_json(args.out / "compare.resolved.json", resolved);
  log << "compared " << runs.size() << " runs -> " << path.string() << '\n';
}

}  // namespace projmc2::cli
