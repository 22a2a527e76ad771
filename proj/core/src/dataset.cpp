#include "kws/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>

#include "kws/error.hpp"
#include "kws/wav.hpp"

namespace kws {
namespace fs = std::filesystem;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "?";
}

int LabelSpace::label_of(std::string_view word) {
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    if (keywords[i] == word) return static_cast<int>(i);
  }
  if (word == kSilenceWord) return silence_index;
  return unknown_index;
}

std::string_view LabelSpace::class_name(int label) {
  if (label >= 0 && label < static_cast<int>(keywords.size())) return keywords[static_cast<std::size_t>(label)];
  if (label == unknown_index) return "unknown";
  if (label == silence_index) return "silence";
  throw ConfigError("label " + std::to_string(label) + " outside the 12-class label space");
}

double split_percentage(std::string_view filename) {
  constexpr std::uint32_t kMaxWavsPerClass = (1u << 27) - 1;
  std::string_view base = filename;
  if (const auto slash = base.find_last_of('/'); slash != std::string_view::npos) base.remove_prefix(slash + 1);
  if (const auto cut = base.find("_nohash_"); cut != std::string_view::npos) base = base.substr(0, cut);

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(base.data(), base.size(), digest, &len, EVP_sha1(), nullptr) != 1 || len != 20) {
    throw Error("SHA-1 digest failed");
  }
  // The digest read as a big integer modulo 2^27 keeps its low 27 bits.
  const std::uint32_t tail = (static_cast<std::uint32_t>(digest[16]) << 24) |
                             (static_cast<std::uint32_t>(digest[17]) << 16) |
                             (static_cast<std::uint32_t>(digest[18]) << 8) | static_cast<std::uint32_t>(digest[19]);
  const std::uint32_t bucket = tail & ((1u << 27) - 1);
  return static_cast<double>(bucket) * (100.0 / static_cast<double>(kMaxWavsPerClass));
}

Split assign_split(std::string_view filename, double validation_pct, double test_pct) {
  const double pct = split_percentage(filename);
  if (pct < validation_pct) return Split::validation;
  if (pct < validation_pct + test_pct) return Split::test;
  return Split::train;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

bool is_wav(const fs::path& p) { return fs::is_regular_file(p) && p.extension() == ".wav"; }

}  // namespace

ScanResult scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root " + root.string() +
                    " does not exist; expected <root>/<word>/*.wav plus <root>/_background_noise_/*.wav");
  }
  ScanResult result;
  std::map<std::string, std::size_t> per_word;
  for (const auto& dir : sorted_entries(root)) {
    if (!fs::is_directory(dir)) continue;
    const std::string word = dir.filename().string();
    if (word == kNoiseDirectory) {
      for (const auto& file : sorted_entries(dir)) {
        if (!is_wav(file)) continue;
        auto wav = read_wav(file);
        result.noise.clips.push_back(AudioBuffer{std::move(wav.samples), wav.sample_rate_hz});
      }
      continue;
    }
    if (word.starts_with('_') || word.starts_with('.')) continue;
    for (const auto& file : sorted_entries(dir)) {
      if (!is_wav(file)) continue;
      const std::string name = file.filename().string();
      result.samples.push_back({word + "/" + name, word, LabelSpace::label_of(word), assign_split(name)});
      ++per_word[word];
    }
  }
  std::string missing;
  for (auto keyword : LabelSpace::keywords) {
    if (per_word[std::string(keyword)] == 0) missing += (missing.empty() ? "" : ", ") + std::string(keyword);
  }
  if (!missing.empty()) {
    throw DataError("dataset root " + root.string() + " has no WAV files for keyword(s): " + missing +
                    "; expected one directory per keyword (yes, no, up, down, left, right, on, off, stop, go)");
  }
  return result;
}

void AugmentationConfig::validate() const {
  if (!(noise_prob >= 0.0 && noise_prob <= 1.0)) throw ConfigError("augmentation: noise_prob must be in [0, 1]");
  if (!(shift_ms >= 0.0)) throw ConfigError("augmentation: shift range must be non-negative");
  if (!(cache_eviction_frac >= 0.0 && cache_eviction_frac <= 1.0)) {
    throw ConfigError("augmentation: cache_eviction_frac must be in [0, 1]");
  }
  if (!(silence_frac >= 0.0 && unknown_frac >= 0.0)) throw ConfigError("augmentation: class fractions must be >= 0");
  if (!(noise_volume_max >= 0.0)) throw ConfigError("augmentation: noise_volume_max must be >= 0");
}

AudioBuffer shift_audio(const AudioBuffer& buffer, long shift_samples) {
  const long n = static_cast<long>(buffer.samples.size());
  AudioBuffer out{std::vector<float>(buffer.samples.size(), 0.0f), buffer.sample_rate_hz};
  for (long i = 0; i < n; ++i) {
    const long src = i - shift_samples;
    if (src >= 0 && src < n) out.samples[static_cast<std::size_t>(i)] = buffer.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

AudioBuffer noise_segment(const AudioBuffer& clip, std::size_t offset, float scale) {
  AudioBuffer out{std::vector<float>(kClipSamples, 0.0f), clip.sample_rate_hz};
  for (std::size_t i = 0; i < kClipSamples && offset + i < clip.samples.size(); ++i) {
    out.samples[i] = clip.samples[offset + i] * scale;
  }
  return out;
}

namespace {

AudioBuffer random_noise_cut(const NoiseBank& noise, float scale_max, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, noise.clips.size() - 1);
  const AudioBuffer& clip = noise.clips[pick(rng)];
  const std::size_t span = clip.samples.size() > kClipSamples ? clip.samples.size() - kClipSamples : 0;
  std::uniform_int_distribution<std::size_t> start(0, span);
  const std::size_t offset = start(rng);
  std::uniform_real_distribution<float> volume(0.0f, scale_max);
  return noise_segment(clip, offset, volume(rng));
}

}  // namespace

AudioBuffer make_silence(const NoiseBank& noise, Rng& rng) {
  if (noise.empty()) throw DataError("make_silence: noise bank is empty");
  return random_noise_cut(noise, 1.0f, rng);
}

AudioBuffer augment(const AudioBuffer& sample, const NoiseBank& noise, const AugmentationConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> shift_dist(-config.shift_ms, config.shift_ms);
  const double shift_ms = config.shift_ms > 0.0 ? shift_dist(rng) : 0.0;
  const long shift = std::lround(shift_ms * kSampleRate / 1000.0);
  AudioBuffer out = shift == 0 ? sample : shift_audio(sample, shift);

  std::bernoulli_distribution add_noise(config.noise_prob);
  if (add_noise(rng)) {
    if (noise.empty()) throw DataError("augment: noise requested but the noise bank is empty");
    const AudioBuffer cut = random_noise_cut(noise, static_cast<float>(config.noise_volume_max), rng);
    const std::size_t n = std::min(out.samples.size(), cut.samples.size());
    for (std::size_t i = 0; i < n; ++i) out.samples[i] += cut.samples[i];
  }
  for (float& v : out.samples) v = std::clamp(v, -1.0f, 1.0f);
  return out;
}

const std::vector<LabeledSample>& SplitSet::operator[](Split split) const {
  switch (split) {
    case Split::train:
      return train;
    case Split::validation:
      return validation;
    case Split::test:
      return test;
  }
  return train;
}

SplitSet compose_splits(const std::vector<LabeledSample>& samples, const AugmentationConfig& config,
                        std::size_t limit, std::uint64_t composition_seed) {
  Rng rng(composition_seed);
  SplitSet set;
  for (Split split : {Split::train, Split::validation, Split::test}) {
    std::vector<LabeledSample> keywords, unknown;
    for (const auto& s : samples) {
      if (s.split != split) continue;
      (s.label == LabelSpace::unknown_index ? unknown : keywords).push_back(s);
    }
    const auto n_keywords = static_cast<double>(keywords.size());
    const auto n_silence = static_cast<std::size_t>(std::ceil(n_keywords * config.silence_frac));
    const auto n_unknown =
        std::min(unknown.size(), static_cast<std::size_t>(std::ceil(n_keywords * config.unknown_frac)));
    std::shuffle(unknown.begin(), unknown.end(), rng);

    auto& out = split == Split::train ? set.train : split == Split::validation ? set.validation : set.test;
    out = std::move(keywords);
    out.insert(out.end(), unknown.begin(), unknown.begin() + static_cast<std::ptrdiff_t>(n_unknown));
    for (std::size_t i = 0; i < n_silence; ++i) {
      out.push_back({"", std::string(kSilenceWord), LabelSpace::silence_index, split});
    }
    if (limit > 0 && out.size() > limit) {
      std::shuffle(out.begin(), out.end(), rng);
      out.resize(limit);
    }
  }
  return set;
}

void write_manifest(std::ostream& out, const std::vector<LabeledSample>& samples) {
  for (const auto& s : samples) {
    nlohmann::json row = {{"path", s.path}, {"label", s.label}, {"split", split_name(s.split)}};
    out << row.dump() << '\n';
  }
}

}  // namespace kws
