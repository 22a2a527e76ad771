#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace kws {

struct WavData {
  std::vector<float> samples;  // scaled to [-1, 1)
  int sample_rate_hz = 0;
};

/// Reads a RIFF/WAVE file holding 16-bit signed little-endian mono PCM at
/// 16 kHz. Anything else (other encodings, channel counts, sample rates) is
/// rejected with a FormatError that names the offending field.
WavData read_wav(const std::filesystem::path& path);
WavData parse_wav(std::span<const std::uint8_t> bytes);

/// Writes 16-bit mono PCM; samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate_hz = 16000);
std::vector<std::uint8_t> encode_wav(std::span<const float> samples, int sample_rate_hz = 16000);

}  // namespace kws
