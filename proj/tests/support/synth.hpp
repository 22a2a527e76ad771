#pragma once

// Synthetic stand-ins for Speech Commands audio. Each class is a distinct
// tone pattern; "speakers" vary pitch, onset and loudness.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kws/dataset.hpp"
#include "kws/frontend.hpp"
#include "kws/trainer.hpp"

namespace kws::testing {

/// One second of audio for `word` (keywords and any unknown word).
AudioBuffer synth_word(const std::string& word, std::uint64_t variant);
AudioBuffer synth_noise(std::size_t n_samples, std::uint64_t seed);

struct CorpusOptions {
  std::size_t speakers = 20;
  std::size_t clips_per_speaker = 1;
  std::vector<std::string> unknown_words = {"bed", "cat"};
  std::size_t noise_clips = 2;
  std::uint64_t seed = 7;
};

/// Writes <root>/<word>/<speaker>_nohash_<k>.wav and _background_noise_/*.wav.
void write_corpus(const std::filesystem::path& root, const CorpusOptions& options = {});

/// Serves audio from memory, keyed by LabeledSample::path.
class MemoryAudioSource final : public AudioSource {
 public:
  void add(const std::string& path, AudioBuffer audio) { clips_[path] = std::move(audio); }
  AudioBuffer load(const LabeledSample& sample) const override;

 private:
  std::map<std::string, AudioBuffer> clips_;
};

/// `n` training samples cycling through the 12 classes, audio registered in
/// `source`. Silence slots get a quiet noise clip rather than an empty path.
std::vector<LabeledSample> memory_samples(std::size_t n, MemoryAudioSource& source, std::uint64_t seed = 1,
                                          Split split = Split::train);

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "kws");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace kws::testing
