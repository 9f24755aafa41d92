#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tracemin::checkpoint {

/// Pooled parameters of one trial, split into per-state blocks (a shared
/// circuit stores a single block), plus enough metadata to rebuild the
/// state set. Values are stored as hexadecimal floats so a round trip is
/// bit-exact.
struct Checkpoint {
  nlohmann::json metadata;  // state-set metadata
  std::uint64_t seed = 0;
  std::size_t ns = 0;
  std::vector<std::vector<double>> blocks;
  std::string config_text;  // echoed run configuration, may be empty

  std::vector<double> pooled() const;
};

/// Splits `pooled` into `n_blocks` equal blocks.
Checkpoint make(nlohmann::json metadata, std::uint64_t seed, std::size_t ns,
                const std::vector<double>& pooled, std::size_t n_blocks);

void write(std::ostream& os, const Checkpoint& c);
Checkpoint read(std::istream& is);

void save(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load(const std::filesystem::path& path);

}  // namespace tracemin::checkpoint
