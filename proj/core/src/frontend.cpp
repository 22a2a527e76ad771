#include "kws/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "kws/error.hpp"

namespace kws {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Plans are created once per size under a lock; executing a plan on fresh
// arrays through the new-array interface is thread safe.
fftw_plan real_fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, plan);
  return plan;
}

// Edge frequencies (n_mels + 2) evenly spaced on the mel scale.
std::vector<double> mel_edges(const FrontendConfig& cfg) {
  const std::size_t n = cfg.n_mfcc + 2;
  const double lo = hz_to_mel(cfg.band_low_hz), hi = hz_to_mel(cfg.band_high_hz);
  std::vector<double> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return edges;
}

// Row-major n_mels x (fft_size/2 + 1) triangular weights.
std::vector<double> mel_filterbank(const FrontendConfig& cfg) {
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const auto edges = mel_edges(cfg);
  std::vector<double> fb(cfg.n_mfcc * bins, 0.0);
  for (std::size_t j = 0; j < cfg.n_mfcc; ++j) {
    const double lo = edges[j], center = edges[j + 1], hi = edges[j + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRate / static_cast<double>(cfg.fft_size);
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      fb[j * bins + k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized by a0
};

enum class Pass { low, high };

Biquad butterworth_section(Pass pass, double cutoff_hz, double q) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / kSampleRate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b_mid = pass == Pass::low ? (1.0 - cw) : -(1.0 + cw);
  const double b_edge = pass == Pass::low ? (1.0 - cw) / 2.0 : (1.0 + cw) / 2.0;
  return {b_edge / a0, b_mid / a0, b_edge / a0, -2.0 * cw / a0, (1.0 - alpha) / a0};
}

void run_biquad(const Biquad& s, std::vector<double>& x) {
  double z1 = 0.0, z2 = 0.0;
  for (double& v : x) {
    const double y = s.b0 * v + z1;
    z1 = s.b1 * v - s.a1 * y + z2;
    z2 = s.b2 * v - s.a2 * y;
    v = y;
  }
}

// Log mel energies of every frame, in double. Caller has validated cfg.
std::vector<double> log_mel_impl(const std::vector<float>& samples, const FrontendConfig& cfg, std::size_t n_frames) {
  const std::size_t win = cfg.window_samples(), shift = cfg.shift_samples(), nfft = cfg.fft_size;
  const std::size_t bins = nfft / 2 + 1, n_mels = cfg.n_mfcc;

  std::vector<double> emphasized(samples.size());
  if (!samples.empty()) emphasized[0] = samples[0];
  for (std::size_t i = 1; i < samples.size(); ++i) {
    emphasized[i] = static_cast<double>(samples[i]) - cfg.pre_emphasis * static_cast<double>(samples[i - 1]);
  }
  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win - 1));
  }
  const auto fb = mel_filterbank(cfg);
  const fftw_plan plan = real_fft_plan(nfft);

  std::vector<double> frame(nfft, 0.0);
  std::vector<fftw_complex> spectrum(bins);
  std::vector<double> power(bins);
  std::vector<double> out(n_frames * n_mels);
  for (std::size_t t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t n = 0; n < win; ++n) frame[n] = emphasized[t * shift + n] * window[n];
    fftw_execute_dft_r2c(plan, frame.data(), spectrum.data());
    for (std::size_t k = 0; k < bins; ++k) power[k] = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    for (std::size_t j = 0; j < n_mels; ++j) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb[j * bins + k] * power[k];
      out[t * n_mels + j] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

void require_one_second(const AudioBuffer& buffer) {
  if (buffer.sample_rate_hz != kSampleRate) {
    throw DataError("audio must be sampled at 16000 Hz, got " + std::to_string(buffer.sample_rate_hz));
  }
  if (buffer.samples.size() != kClipSamples) {
    throw DataError("extract_mfcc expects exactly 16000 samples, got " + std::to_string(buffer.samples.size()) +
                    " (apply pad_or_clip first)");
  }
}

}  // namespace

std::size_t FrontendConfig::window_samples() const {
  return static_cast<std::size_t>(std::lround(window_ms * kSampleRate / 1000.0));
}

std::size_t FrontendConfig::shift_samples() const {
  return static_cast<std::size_t>(std::lround(shift_ms * kSampleRate / 1000.0));
}

void FrontendConfig::validate() const {
  if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz && band_high_hz <= kSampleRate / 2.0)) {
    throw ConfigError("frontend: need 0 < band_low_hz < band_high_hz <= 8000");
  }
  if (!(window_ms > shift_ms && shift_ms > 0.0)) throw ConfigError("frontend: need window_ms > shift_ms > 0");
  if (n_mfcc == 0) throw ConfigError("frontend: n_mfcc must be positive");
  if (!(log_floor > 0.0)) throw ConfigError("frontend: log_floor must be positive");
  if (fft_size < window_samples()) throw ConfigError("frontend: fft_size smaller than the analysis window");
}

std::size_t frame_count(std::size_t n_samples, const FrontendConfig& config) {
  const std::size_t win = config.window_samples();
  if (n_samples < win) return 0;
  return (n_samples - win) / config.shift_samples() + 1;
}

AudioBuffer pad_or_clip(const AudioBuffer& buffer) {
  if (buffer.samples.empty()) throw DataError("pad_or_clip: empty audio buffer");
  AudioBuffer out{buffer.samples, buffer.sample_rate_hz};
  out.samples.resize(kClipSamples, 0.0f);
  return out;
}

AudioBuffer band_pass(const AudioBuffer& buffer, const FrontendConfig& config) {
  config.validate();
  // Pole-pair quality factors of a 4th-order Butterworth prototype.
  const double q1 = 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0));
  std::vector<double> x(buffer.samples.begin(), buffer.samples.end());
  for (const auto& s : {butterworth_section(Pass::high, config.band_low_hz, q1),
                        butterworth_section(Pass::high, config.band_low_hz, q2),
                        butterworth_section(Pass::low, config.band_high_hz, q1),
                        butterworth_section(Pass::low, config.band_high_hz, q2)}) {
    run_biquad(s, x);
  }
  AudioBuffer out{std::vector<float>(x.size()), buffer.sample_rate_hz};
  std::transform(x.begin(), x.end(), out.samples.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

std::vector<double> mel_center_frequencies(const FrontendConfig& config) {
  config.validate();
  auto edges = mel_edges(config);
  return {edges.begin() + 1, edges.end() - 1};
}

FeatureMatrix log_mel_energies(const AudioBuffer& buffer, const FrontendConfig& config) {
  config.validate();
  const std::size_t n_frames = frame_count(buffer.samples.size(), config);
  const auto energies = log_mel_impl(buffer.samples, config, n_frames);
  FeatureMatrix out{n_frames, config.n_mfcc, std::vector<float>(energies.size())};
  std::transform(energies.begin(), energies.end(), out.values.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

FeatureMatrix extract_mfcc(const AudioBuffer& buffer, const FrontendConfig& config) {
  config.validate();
  require_one_second(buffer);
  const std::size_t n_frames = frame_count(buffer.samples.size(), config);
  const std::size_t n = config.n_mfcc;
  const auto energies = log_mel_impl(buffer.samples, config, n_frames);

  std::vector<double> dct(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
      dct[i * n + j] = scale * std::cos(std::numbers::pi * static_cast<double>(i) * (2.0 * static_cast<double>(j) + 1.0) /
                                        (2.0 * static_cast<double>(n)));
    }
  }
  FeatureMatrix out{n_frames, n, std::vector<float>(n_frames * n)};
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dct[i * n + j] * energies[t * n + j];
      out.values[t * n + i] = static_cast<float>(s);
    }
  }
  return out;
}

}  // namespace kws
