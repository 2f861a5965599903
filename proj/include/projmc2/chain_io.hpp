#pragma once

#include "projmc2/sampler.hpp"

#include <filesystem>

namespace projmc2::chain_io {

/// Writes `metadata.json` plus one little-endian float64 file per block
/// (`ftilde.bin`, `beta.bin`, `lambda.bin`, `sigma2.bin`), row-major per draw.
void write_chain(const std::filesystem::path& dir, const sampler::ChainStore& chains);

/// Reads a chain directory back. Binary sizes are checked against the shapes
/// recorded in the metadata.
sampler::ChainStore read_chain(const std::filesystem::path& dir);

}  // namespace projmc2::chain_io
