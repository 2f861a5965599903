#include "projmc2/diagnostics.hpp"

#include "projmc2/csv.hpp"
#include "projmc2/error.hpp"
#include "projmc2/model.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numeric>

namespace projmc2::diagnostics {

namespace {

constexpr std::size_t kDirectLags = 64;

/// Full biased autocovariance sequence via zero-padded FFT.
std::vector<double> autocovariance_fft(const Eigen::VectorXd& centered) {
  const auto n = static_cast<std::size_t>(centered.size());
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  std::copy(centered.data(), centered.data() + n, padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::complex<double>(std::norm(z), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spec);
  acov.resize(n);
  for (auto& v : acov) v /= static_cast<double>(n);
  return acov;
}

}  // namespace

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& chain) {
  const auto n = static_cast<std::size_t>(chain.size());
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "ESS needs a chain of at least 10 draws");
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd c = chain.array() - chain.mean();
  const double gamma0 = c.squaredNorm() / nd;
  if (!(gamma0 > 0.0) || gamma0 <= 1e-300) return nd;

  std::vector<double> fft_acov;
  const auto rho = [&](std::size_t t) {
    if (t < kDirectLags) {
      const auto len = static_cast<Eigen::Index>(n - t);
      return c.head(len).dot(c.segment(static_cast<Eigen::Index>(t), len)) / nd / gamma0;
    }
    if (fft_acov.empty()) fft_acov = autocovariance_fft(c);
    return fft_acov[t] / gamma0;
  };

  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double cap = 1.5 * nd;
  if (!(tau > 0.0)) return cap;
  return std::min(nd / tau, cap);
}

sampler::ChainStore align_signs(const sampler::ChainStore& chains) {
  const std::size_t draws = chains.draws();
  sampler::ChainStore out = chains;
  if (draws == 0) return out;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(chains.lambda.rows),
                                               static_cast<Eigen::Index>(chains.lambda.cols));
  for (std::size_t d = 0; d < draws; ++d) mean += chains.lambda.get(d);
  mean /= static_cast<double>(draws);

  for (std::size_t d = 0; d < draws; ++d) {
    Eigen::MatrixXd lambda = chains.lambda.get(d);
    Eigen::MatrixXd f = chains.ftilde.get(d);
    bool flipped = false;
    for (Eigen::Index k = 0; k < lambda.rows(); ++k) {
      if (lambda.row(k).dot(mean.row(k)) < 0.0) {
        lambda.row(k) = -lambda.row(k);
        f.col(k) = -f.col(k);
        flipped = true;
      }
    }
    if (flipped) {
      out.lambda.set(d, lambda);
      out.ftilde.set(d, f);
    }
  }
  return out;
}

SphericalSummary spherical_summary(const Eigen::MatrixXd& samples) {
  if (samples.cols() < 2) throw Error(ErrorCode::InvalidArgument, "spherical summary needs at least two samples");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(samples.rows());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double norm = samples.col(j).norm();
    if (!(norm > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample " + std::to_string(j) + " is zero");
    acc += samples.col(j) / norm;
  }
  acc /= static_cast<double>(samples.cols());
  SphericalSummary s;
  s.r_bar = std::min(acc.norm(), 1.0);
  if (s.r_bar < 1e-12) throw Error(ErrorCode::Numerical, "degenerate mean direction");
  s.mean_direction = acc / acc.norm();
  s.spherical_variance = std::clamp(1.0 - s.r_bar * s.r_bar, 0.0, 1.0);
  return s;
}

SphericalSummary spherical_summary(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "spherical summary needs at least two samples");
  Eigen::MatrixXd m(samples.front().size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j].size() != m.rows()) throw Error(ErrorCode::DimensionMismatch, "samples differ in length");
    m.col(static_cast<Eigen::Index>(j)) = samples[j];
  }
  return spherical_summary(m);
}

std::vector<FactorMetric> factor_recovery_metrics(const Eigen::MatrixXd& true_f, const sampler::ChainStore& chains,
                                                  RecoveryMode mode) {
  const auto n = static_cast<Eigen::Index>(chains.ftilde.rows);
  const auto k = static_cast<Eigen::Index>(chains.ftilde.cols);
  if (true_f.cols() != k) {
    throw Error(ErrorCode::DimensionMismatch, "true factors have K = " + std::to_string(true_f.cols()) +
                                                  ", chains have K = " + std::to_string(k));
  }
  if (true_f.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "true factors have " + std::to_string(true_f.rows()) +
                                                  " rows, chains have " + std::to_string(n));
  }
  Eigen::MatrixXd target = mode == RecoveryMode::Stiefel ? model::project_g(true_f)
                                                         : Eigen::MatrixXd(true_f.rowwise() - true_f.colwise().mean());
  target.colwise().normalize();

  const std::size_t draws = chains.draws();
  std::vector<FactorMetric> out;
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::MatrixXd cols(n, static_cast<Eigen::Index>(draws));
    for (std::size_t d = 0; d < draws; ++d) {
      const std::size_t base = d * chains.ftilde.stride();
      for (Eigen::Index i = 0; i < n; ++i)
        cols(i, static_cast<Eigen::Index>(d)) = chains.ftilde.data[base + static_cast<std::size_t>(i * k + j)];
    }
    const auto s = spherical_summary(cols);
    const double dist = std::min((s.mean_direction - target.col(j)).norm(), (s.mean_direction + target.col(j)).norm());
    out.push_back({dist, s.spherical_variance});
  }
  return out;
}

const BlockESS& ESSReport::at(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.block == name) return b;
  throw Error(ErrorCode::InvalidArgument, "ESS report has no block '" + name + "'");
}

std::vector<double> block_ess(const sampler::ChainStore& chains, const std::string& block) {
  std::vector<double> out;
  const auto each = [&](const sampler::Block& b, std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = 0; c < b.cols; ++c) out.push_back(effective_sample_size(b.series(r, c)));
  };
  const auto need_intercept = [&] {
    if (!chains.intercept_row) throw Error(ErrorCode::InvalidArgument, "block '" + block + "' needs an intercept row");
    return *chains.intercept_row;
  };
  if (block == "beta0") {
    const std::size_t r = need_intercept();
    each(chains.beta, r, r + 1);
  } else if (block == "beta1") {
    const std::size_t r = need_intercept();
    each(chains.beta, 0, r);
    each(chains.beta, r + 1, chains.beta.rows);
  } else if (block == "beta") {
    each(chains.beta, 0, chains.beta.rows);
  } else if (block == "lambda") {
    each(chains.lambda, 0, chains.lambda.rows);
  } else if (block == "f") {
    each(chains.ftilde, 0, chains.ftilde.rows);
  } else if (block == "sigma2") {
    each(chains.sigma2, 0, chains.sigma2.rows);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown ESS block '" + block + "'");
  }
  return out;
}

ESSReport ess_report(const sampler::ChainStore& chains, const std::vector<std::string>& blocks) {
  ESSReport report;
  for (const auto& name : blocks) {
    std::vector<double> ess = block_ess(chains, name);
    BlockESS b;
    b.block = name;
    b.count = ess.size();
    if (!ess.empty()) {
      std::sort(ess.begin(), ess.end());
      b.min = ess.front();
      b.mean = std::accumulate(ess.begin(), ess.end(), 0.0) / static_cast<double>(ess.size());
      const std::size_t h = ess.size() / 2;
      b.median = ess.size() % 2 ? ess[h] : 0.5 * (ess[h - 1] + ess[h]);
      const auto low = std::count_if(ess.begin(), ess.end(), [](double v) { return v < 100.0; });
      b.frac_below_100 = static_cast<double>(low) / static_cast<double>(ess.size());
    }
    report.blocks.push_back(b);
  }
  return report;
}

double neighbor_correlation(const Eigen::VectorXd& values, const std::vector<std::vector<std::size_t>>& neighbors) {
  if (static_cast<Eigen::Index>(neighbors.size()) != values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "neighbor lists do not match value count");
  }
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, cnt = 0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const double a = values[static_cast<Eigen::Index>(i)];
    for (const std::size_t j : neighbors[i]) {
      const double b = values[static_cast<Eigen::Index>(j)];
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
      cnt += 1;
    }
  }
  if (cnt < 2) throw Error(ErrorCode::InvalidArgument, "need at least two neighbor pairs");
  const double cov = sab / cnt - (sa / cnt) * (sb / cnt);
  const double va = saa / cnt - (sa / cnt) * (sa / cnt);
  const double vb = sbb / cnt - (sb / cnt) * (sb / cnt);
  if (!(va > 0.0) || !(vb > 0.0)) throw Error(ErrorCode::Numerical, "constant field has no neighbor correlation");
  return cov / std::sqrt(va * vb);
}

Eigen::MatrixXd posterior_mean_factors(const sampler::ChainStore& chains) {
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(chains.ftilde.rows),
                                               static_cast<Eigen::Index>(chains.ftilde.cols));
  for (std::size_t d = 0; d < chains.draws(); ++d) mean += chains.ftilde.get(d);
  if (chains.draws() > 0) mean /= static_cast<double>(chains.draws());
  return mean;
}

void write_ess_csv(const std::filesystem::path& path, const ESSReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "block,count,min,mean,median,frac_below_100\n";
  for (const auto& b : report.blocks) {
    out << b.block << ',' << b.count << ',' << csv::format_double(b.min) << ',' << csv::format_double(b.mean) << ','
        << csv::format_double(b.median) << ',' << csv::format_double(b.frac_below_100) << '\n';
  }
}

void write_factor_metrics_csv(const std::filesystem::path& path, const std::vector<FactorMetric>& metrics,
                              RecoveryMode mode) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "factor,mode,euclidean_distance,spherical_variance\n";
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    out << k + 1 << ',' << (mode == RecoveryMode::Stiefel ? "stiefel" : "sphere") << ','
        << csv::format_double(metrics[k].euclidean_distance) << ','
        << csv::format_double(metrics[k].spherical_variance) << '\n';
  }
}

void write_traces_csv(const std::filesystem::path& path, const sampler::ChainStore& chains) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "iteration,parameter,value\n";
  const auto& cfg = chains.config;
  for (std::size_t d = 0; d < chains.draws(); ++d) {
    const std::size_t iteration = cfg.warmup + (d + 1) * cfg.thin;
    const auto emit = [&](const sampler::Block& b, const char* name, bool vector) {
      for (std::size_t r = 0; r < b.rows; ++r) {
        for (std::size_t c = 0; c < b.cols; ++c) {
          out << iteration << ',' << name << '[' << r + 1;
          if (!vector) out << ';' << c + 1;
          out << "]," << csv::format_double(b.data[d * b.stride() + r * b.cols + c]) << '\n';
        }
      }
    };
    emit(chains.beta, "beta", false);
    emit(chains.lambda, "lambda", false);
    emit(chains.sigma2, "sigma2", true);
  }
}

}  // namespace projmc2::diagnostics
