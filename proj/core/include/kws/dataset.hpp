#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kws/frontend.hpp"

namespace kws {

using Rng = std::mt19937_64;

enum class Split { train, validation, test };
std::string_view split_name(Split split);

/// The 12-way label space: ten keywords, then unknown and silence.
struct LabelSpace {
  static constexpr std::array<std::string_view, 10> keywords = {"yes",  "no", "up",  "down", "left",
                                                                "right", "on", "off", "stop", "go"};
  static constexpr int unknown_index = 10;
  static constexpr int silence_index = 11;
  static constexpr int n_classes = 12;

  /// Keyword index, or unknown_index for any other word.
  static int label_of(std::string_view word);
  static std::string_view class_name(int label);
};

inline constexpr std::string_view kNoiseDirectory = "_background_noise_";
inline constexpr std::string_view kSilenceWord = "_silence_";

struct LabeledSample {
  std::string path;  // relative to the dataset root; empty for generated silence
  std::string word;
  int label = 0;
  Split split = Split::train;
};

/// Deterministic split from the file name. Any "_nohash_..." suffix is
/// stripped so every clip of one speaker lands in the same split; the stem is
/// SHA-1 hashed and the digest taken modulo 2^27 as a percentage.
Split assign_split(std::string_view filename, double validation_pct = 10.0, double test_pct = 10.0);
/// The percentage in [0, 100] that assign_split compares against.
double split_percentage(std::string_view filename);

struct NoiseBank {
  std::vector<AudioBuffer> clips;
  bool empty() const { return clips.empty(); }
};

struct ScanResult {
  std::vector<LabeledSample> samples;  // sorted by path
  NoiseBank noise;
};

/// Walks <root>/<word>/*.wav. Keyword directories must exist and be non-empty;
/// other words become unknown; _background_noise_ feeds the NoiseBank.
ScanResult scan_dataset(const std::filesystem::path& root);

struct AugmentationConfig {
  double noise_prob = 0.8;
  double shift_ms = 100.0;  // shifts drawn from Uniform[-shift_ms, shift_ms]
  double cache_eviction_frac = 0.3;
  double silence_frac = 0.1;
  double unknown_frac = 0.1;
  double noise_volume_max = 0.1;

  void validate() const;
};

/// Delays (positive) or advances (negative) the signal by whole samples,
/// filling with zeros. Length is preserved.
AudioBuffer shift_audio(const AudioBuffer& buffer, long shift_samples);

/// One second of `clip` starting at `offset`, multiplied by `scale`.
AudioBuffer noise_segment(const AudioBuffer& clip, std::size_t offset, float scale);

/// A random one-second cut of a random noise clip scaled by Uniform[0, 1].
AudioBuffer make_silence(const NoiseBank& noise, Rng& rng);

/// Time shift by Uniform[-shift_ms, shift_ms], then with probability
/// noise_prob add a random noise cut scaled by Uniform[0, noise_volume_max];
/// the result is clamped to [-1, 1]. `sample` must already be one second.
AudioBuffer augment(const AudioBuffer& sample, const NoiseBank& noise, const AugmentationConfig& config, Rng& rng);

struct SplitSet {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;

  const std::vector<LabeledSample>& operator[](Split split) const;
};

inline constexpr std::uint64_t kCompositionSeed = 59185;

/// Per split: every keyword clip, plus silence slots and a random subset of
/// unknown-word clips, each sized as a fraction of the keyword count (rounded
/// up). `limit` > 0 keeps a random subset of at most that many per split.
SplitSet compose_splits(const std::vector<LabeledSample>& samples, const AugmentationConfig& config,
                        std::size_t limit = 0, std::uint64_t composition_seed = kCompositionSeed);

/// One JSON object per line: {"path", "label", "split"}.
void write_manifest(std::ostream& out, const std::vector<LabeledSample>& samples);

}  // namespace kws
