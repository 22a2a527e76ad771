#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "kws/checkpoint.hpp"
#include "kws/error.hpp"
#include "synth.hpp"

namespace kws {
namespace {

Checkpoint sample_checkpoint(const std::string& arch = "res8-narrow") {
  Network net(arch_by_name(arch), 3);
  std::vector<std::vector<float>> velocity;
  for (auto& p : net.parameters()) velocity.emplace_back(p.tensor->numel(), 0.25f);
  Checkpoint c;
  capture_model(net, &velocity, c);
  c.epoch = 2;
  c.validation_accuracy = 0.5;
  c.learning_rate = 0.01;
  c.steps = 40;
  c.rng_state = "1 2 3";
  c.history = {{1, 2.0, 0.1, 0.2, 0.1, 20}, {2, 1.5, 0.3, 0.5, 0.1, 40}};
  c.cache = {{0, 1}, {5, 2}};
  return c;
}

TEST(Checkpoint, ByteIdenticalRoundTrip) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  const auto decoded = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(decoded), bytes);
  EXPECT_EQ(decoded.history.size(), 2u);
  EXPECT_EQ(decoded.cache[1], (std::pair<std::uint64_t, std::uint32_t>{5, 2}));
}

TEST(Checkpoint, FileRoundTripRestoresParameters) {
  testing::TempDir dir;
  const auto c = sample_checkpoint();
  save_checkpoint(c, dir.path() / "a.ckpt");
  const auto loaded = load_checkpoint(dir.path() / "a.ckpt");
  Network net(arch_by_name("res8-narrow"), 99);
  apply_model(loaded, net);
  for (auto& p : net.parameters()) {
    const Tensor* saved = c.find(p.name);
    ASSERT_NE(saved, nullptr) << p.name;
    EXPECT_TRUE(std::equal(saved->data().begin(), saved->data().end(), p.tensor->data().begin())) << p.name;
  }
  for (auto& bn : net.batch_norms()) EXPECT_NE(c.find(bn.name + ".running_var"), nullptr);
}

TEST(Checkpoint, ArchMismatch) {
  Network res8(arch_by_name("res8"), 1);
  EXPECT_THROW(apply_model(sample_checkpoint("res15"), res8), MismatchError);
  // Same layer names but the wrong width.
  auto narrow = sample_checkpoint("res8-narrow");
  narrow.arch = "res8";
  EXPECT_THROW(apply_model(narrow, res8), MismatchError);
}

TEST(Checkpoint, BadMagicVersionAndTruncation) {
  auto bytes = encode_checkpoint(sample_checkpoint());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  auto version = bytes;
  version[8] = 9;
  EXPECT_THROW(decode_checkpoint(version), VersionError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  for (std::size_t cut : {std::size_t{4}, std::size_t{13}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_checkpoint(prefix), FormatError) << cut;
  }
  std::vector<std::uint8_t> tail(bytes.begin(), bytes.begin() + 40);
  EXPECT_THROW(decode_checkpoint(tail), TruncatedError);
}

TEST(Checkpoint, CorruptionNeverCrashes) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pos(8 + 4, 400);
  for (int trial = 0; trial < 300; ++trial) {
    auto b = bytes;
    b[pos(rng)] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      decode_checkpoint(b);
    } catch (const FormatError&) {
    }
  }
}

TEST(Checkpoint, MissingFile) { EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), Error); }

}  // namespace
}  // namespace kws
