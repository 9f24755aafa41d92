#include "tracemin/checkpoint.hpp"
#include "tracemin/errors.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

using namespace tracemin;
using namespace tracemin::checkpoint;

namespace {

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

std::vector<double> awkward_values() {
  std::vector<double> v{0.0,
                        -0.0,
                        1.0 / 3.0,
                        -2.5e-310,  // subnormal
                        std::numeric_limits<double>::denorm_min(),
                        std::numeric_limits<double>::max(),
                        std::numeric_limits<double>::lowest(),
                        std::numeric_limits<double>::epsilon(),
                        std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::quiet_NaN()};
  std::mt19937_64 g(11);
  std::normal_distribution<double> n(0.0, 1e3);
  while (v.size() < 24) v.push_back(n(g));
  return v;
}

Checkpoint sample() {
  return make({{"family", "periodic_mps"}, {"bond_dim", 3}}, 0xdeadbeefcafeULL, 3,
              awkward_values(), 3);
}

std::string serialize(const Checkpoint& c) {
  std::ostringstream os;
  write(os, c);
  return os.str();
}

}  // namespace

TEST(Checkpoint, MakeSplitsBlocks) {
  const auto c = sample();
  ASSERT_EQ(c.blocks.size(), 3u);
  EXPECT_EQ(c.blocks[0].size(), 8u);
  const auto p = c.pooled();
  const auto v = awkward_values();
  ASSERT_EQ(p.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(bits(p[i]), bits(v[i]));
  EXPECT_THROW(make({}, 1, 5, v, 5), LengthMismatch);
}

TEST(Checkpoint, StreamRoundTripIsBitExact) {
  auto c = sample();
  c.config_text = "[system]\nexperiment = heisenberg\n# comment \"quoted\"\n";
  std::istringstream is(serialize(c));
  const auto r = read(is);
  EXPECT_EQ(r.seed, c.seed);
  EXPECT_EQ(r.ns, c.ns);
  EXPECT_EQ(r.metadata, c.metadata);
  EXPECT_EQ(r.config_text, c.config_text);
  ASSERT_EQ(r.blocks.size(), c.blocks.size());
  for (std::size_t b = 0; b < c.blocks.size(); ++b) {
    ASSERT_EQ(r.blocks[b].size(), c.blocks[b].size());
    for (std::size_t i = 0; i < c.blocks[b].size(); ++i) {
      EXPECT_EQ(bits(r.blocks[b][i]), bits(c.blocks[b][i])) << b << " " << i;
    }
  }
  // Writing again reproduces the same bytes.
  EXPECT_EQ(serialize(r), serialize(c));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "tracemin_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "params.ckpt";
  const auto c = sample();
  save(path, c);
  const auto r = load(path);
  EXPECT_EQ(serialize(r), serialize(c));
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load(dir / "missing.ckpt"), ConfigError);
}

TEST(Checkpoint, RejectsMalformedInput) {
  const std::string good = serialize(sample());
  auto expect_bad = [](const std::string& text) {
    std::istringstream is(text);
    EXPECT_THROW(read(is), ConfigError) << text.substr(0, 60);
  };
  expect_bad("");
  expect_bad("not-a-checkpoint 1\n");
  expect_bad(good.substr(0, good.size() / 2));

  std::string bad_value = good;
  const auto pos = bad_value.rfind('\n', bad_value.size() - 2);
  bad_value.replace(pos + 1, std::string::npos, "0xzz\n");
  expect_bad(bad_value);

  std::string bad_seed = good;
  const auto s = bad_seed.find("seed ");
  bad_seed.replace(s, bad_seed.find('\n', s) - s, "seed -4x");
  expect_bad(bad_seed);

  std::string bad_meta = good;
  const auto m = bad_meta.find("metadata ");
  bad_meta.replace(m, bad_meta.find('\n', m) - m, "metadata {broken");
  expect_bad(bad_meta);
}
