#include <gtest/gtest.h>

#include <cstring>

#include "kws/error.hpp"
#include "kws/wav.hpp"

namespace kws {
namespace {

void put16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = v & 0xff;
  b[at + 1] = v >> 8;
}
void put32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = (v >> (8 * i)) & 0xff;
}

TEST(Wav, RoundTrip) {
  std::vector<float> s = {0.0f, 0.5f, -0.5f, 1.0f, -1.0f};
  const auto bytes = encode_wav(s);
  EXPECT_EQ(bytes.size(), 44u + 2 * s.size());
  const auto w = parse_wav(bytes);
  EXPECT_EQ(w.sample_rate_hz, 16000);
  ASSERT_EQ(w.samples.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(w.samples[i], s[i], 1.0 / 32767);
}

TEST(Wav, ClampsOnWrite) {
  std::vector<float> s = {2.0f, -3.0f};
  const auto w = parse_wav(encode_wav(s));
  EXPECT_NEAR(w.samples[0], 1.0f, 1e-4);
  EXPECT_NEAR(w.samples[1], -1.0f, 1e-4);
}

TEST(Wav, RejectsStereo) {
  auto b = encode_wav(std::vector<float>(8, 0.1f));
  put16(b, 22, 2);
  EXPECT_THROW(parse_wav(b), FormatError);
}

TEST(Wav, RejectsOtherRatesAndDepths) {
  auto rate = encode_wav(std::vector<float>(8, 0.1f));
  put32(rate, 24, 8000);
  EXPECT_THROW(parse_wav(rate), FormatError);
  auto depth = encode_wav(std::vector<float>(8, 0.1f));
  put16(depth, 34, 8);
  EXPECT_THROW(parse_wav(depth), FormatError);
  auto fmt = encode_wav(std::vector<float>(8, 0.1f));
  put16(fmt, 20, 3);
  EXPECT_THROW(parse_wav(fmt), FormatError);
}

TEST(Wav, RejectsGarbage) {
  std::vector<std::uint8_t> junk(60, 0x41);
  EXPECT_THROW(parse_wav(junk), FormatError);
  auto b = encode_wav(std::vector<float>(8, 0.1f));
  b.resize(30);
  EXPECT_THROW(parse_wav(b), FormatError);
}

TEST(Wav, SkipsUnknownChunks) {
  auto b = encode_wav(std::vector<float>{0.25f, -0.25f});
  std::vector<std::uint8_t> list = {'L', 'I', 'S', 'T', 4, 0, 0, 0, 'a', 'b', 'c', 'd'};
  b.insert(b.begin() + 36, list.begin(), list.end());
  put32(b, 4, static_cast<std::uint32_t>(b.size() - 8));
  const auto w = parse_wav(b);
  ASSERT_EQ(w.samples.size(), 2u);
  EXPECT_NEAR(w.samples[0], 0.25f, 1e-4);
}

}  // namespace
}  // namespace kws
