#include "tracemin/checkpoint.hpp"

#include "tracemin/errors.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tracemin::checkpoint {

namespace {

constexpr const char* kMagic = "tracemin-checkpoint 1";

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(fmt::format("checkpoint: bad value '{}'", s));
  }
  return v;
}

std::string expect_line(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(fmt::format("checkpoint: missing '{}'", key));
  if (line.rfind(key + " ", 0) != 0 && line != key) {
    throw ConfigError(fmt::format("checkpoint: expected '{}', got '{}'", key, line));
  }
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string{};
}

std::size_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  try {
    const auto v = std::stoull(s, &pos);
    if (pos == s.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("checkpoint: bad integer '{}'", s));
}

}  // namespace

std::vector<double> Checkpoint::pooled() const {
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

Checkpoint make(nlohmann::json metadata, std::uint64_t seed, std::size_t ns,
                const std::vector<double>& pooled, std::size_t n_blocks) {
  if (n_blocks == 0 || pooled.size() % n_blocks != 0) {
    throw LengthMismatch("checkpoint: parameters do not split into equal blocks");
  }
  Checkpoint c;
  c.metadata = std::move(metadata);
  c.seed = seed;
  c.ns = ns;
  const std::size_t len = pooled.size() / n_blocks;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    c.blocks.emplace_back(pooled.begin() + static_cast<std::ptrdiff_t>(b * len),
                          pooled.begin() + static_cast<std::ptrdiff_t>((b + 1) * len));
  }
  return c;
}

void write(std::ostream& os, const Checkpoint& c) {
  os << kMagic << '\n';
  os << "metadata " << c.metadata.dump() << '\n';
  os << "seed " << c.seed << '\n';
  os << "ns " << c.ns << '\n';
  // Config text goes in as a JSON string so newlines survive on one line.
  os << "config " << nlohmann::json(c.config_text).dump() << '\n';
  os << "blocks " << c.blocks.size() << '\n';
  for (std::size_t b = 0; b < c.blocks.size(); ++b) {
    os << "block " << b << ' ' << c.blocks[b].size() << '\n';
    for (double v : c.blocks[b]) os << fmt::format("{:a}\n", v);
  }
}

Checkpoint read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw ConfigError("checkpoint: bad header");
  Checkpoint c;
  try {
    c.metadata = nlohmann::json::parse(expect_line(is, "metadata"));
    c.seed = parse_size(expect_line(is, "seed"));
    c.ns = parse_size(expect_line(is, "ns"));
    c.config_text = nlohmann::json::parse(expect_line(is, "config")).get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("checkpoint: {}", e.what()));
  }
  const std::size_t n_blocks = parse_size(expect_line(is, "blocks"));
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::istringstream head(expect_line(is, "block"));
    std::size_t index = 0;
    std::size_t len = 0;
    if (!(head >> index >> len) || index != b) throw ConfigError("checkpoint: bad block header");
    std::vector<double> values(len);
    for (auto& v : values) {
      if (!std::getline(is, line)) throw ConfigError("checkpoint: truncated block");
      v = parse_double(line);
    }
    c.blocks.push_back(std::move(values));
  }
  return c;
}

void save(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream os(path);
  if (!os) throw ConfigError(fmt::format("cannot write checkpoint {}", path.string()));
  write(os, c);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(fmt::format("cannot read checkpoint {}", path.string()));
  return read(is);
}

}  // namespace tracemin::checkpoint
