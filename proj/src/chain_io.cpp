#include "projmc2/chain_io.hpp"

#include "projmc2/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace projmc2::chain_io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void write_block(const fs::path& path, const sampler::Block& block) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::vector<std::uint64_t> raw(block.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_le(std::bit_cast<std::uint64_t>(block.data[i]));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

sampler::Block read_block(const fs::path& dir, const std::string& name, const json& shape) {
  const fs::path path = dir / (name + ".bin");
  if (!shape.is_array() || shape.size() != 3) {
    throw Error(ErrorCode::Parse, "metadata shape for " + name + " must be [draws, rows, cols]");
  }
  sampler::Block block(name, shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>());
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot read " + path.string());
  const std::uintmax_t expected = block.data.size() * 8;
  if (bytes != expected) {
    throw Error(ErrorCode::Parse, "corrupt binary " + path.string() + ": expected " + std::to_string(expected) +
                                      " bytes from metadata shape, found " + std::to_string(bytes));
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint64_t> raw(block.data.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
  if (!in) throw Error(ErrorCode::Io, "failed reading " + path.string());
  for (std::size_t i = 0; i < raw.size(); ++i) block.data[i] = std::bit_cast<double>(to_le(raw[i]));
  return block;
}

}  // namespace

void write_chain(const fs::path& dir, const sampler::ChainStore& chains) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());

  json meta;
  meta["dtype"] = "f64le";
  meta["layout"] = "row-major [draws, rows, cols]";
  meta["iterations"] = chains.config.iterations;
  meta["warmup"] = chains.config.warmup;
  meta["thin"] = chains.config.thin;
  meta["seed"] = chains.config.seed;
  meta["chain"] = chains.config.chain;
  meta["algorithm"] = std::string(sampler::to_string(chains.algorithm));
  meta["K"] = chains.config.k;
  meta["lsmr"] = {{"atol", chains.config.lsmr.atol},
                  {"btol", chains.config.lsmr.btol},
                  {"max_iter", chains.config.lsmr.max_iter}};
  meta["wall_seconds"] = chains.wall_seconds;
  meta["lsmr_warnings"] = chains.lsmr_warnings;
  meta["intercept_row"] = chains.intercept_row ? json(*chains.intercept_row) : json(nullptr);
  for (const auto* b : chains.blocks()) {
    meta["shape"][b->name] = {b->draws(), b->rows, b->cols};
    write_block(dir / (b->name + ".bin"), *b);
  }
  std::ofstream out(dir / "metadata.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
}

sampler::ChainStore read_chain(const fs::path& dir) {
  const fs::path mpath = dir / "metadata.json";
  std::ifstream in(mpath);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + mpath.string());
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }
  sampler::ChainStore c;
  try {
    if (meta.at("dtype").get<std::string>() != "f64le") throw Error(ErrorCode::Parse, mpath.string() + ": dtype must be f64le");
    c.config.iterations = meta.at("iterations").get<std::size_t>();
    c.config.warmup = meta.at("warmup").get<std::size_t>();
    c.config.thin = meta.at("thin").get<std::size_t>();
    c.config.seed = meta.at("seed").get<std::uint64_t>();
    c.config.chain = meta.value("chain", 0u);
    c.config.k = meta.at("K").get<std::size_t>();
    c.algorithm = sampler::parse_algorithm(meta.at("algorithm").get<std::string>());
    c.config.algorithm = c.algorithm;
    if (meta.contains("lsmr")) {
      c.config.lsmr.atol = meta["lsmr"].value("atol", c.config.lsmr.atol);
      c.config.lsmr.btol = meta["lsmr"].value("btol", c.config.lsmr.btol);
      c.config.lsmr.max_iter = meta["lsmr"].value("max_iter", c.config.lsmr.max_iter);
    }
    c.wall_seconds = meta.value("wall_seconds", 0.0);
    c.lsmr_warnings = meta.value("lsmr_warnings", std::size_t{0});
    if (meta.contains("intercept_row") && !meta["intercept_row"].is_null())
      c.intercept_row = meta["intercept_row"].get<std::size_t>();
    const json& shape = meta.at("shape");
    c.ftilde = read_block(dir, "ftilde", shape.at("ftilde"));
    c.beta = read_block(dir, "beta", shape.at("beta"));
    c.lambda = read_block(dir, "lambda", shape.at("lambda"));
    c.sigma2 = read_block(dir, "sigma2", shape.at("sigma2"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, mpath.string() + ": " + e.what());
  }
  const std::size_t d = c.beta.draws();
  if (c.ftilde.draws() != d || c.lambda.draws() != d || c.sigma2.draws() != d) {
    throw Error(ErrorCode::Parse, dir.string() + ": blocks disagree on the number of draws");
  }
  if (c.lambda.rows != c.config.k || c.ftilde.cols != c.config.k) {
    throw Error(ErrorCode::Parse, dir.string() + ": block shapes disagree with K");
  }
  return c;
}

}  // namespace projmc2::chain_io
