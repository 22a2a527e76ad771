#pragma once

#include <cstddef>
#include <vector>

namespace kws {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 16000;

struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate_hz = kSampleRate;
};

/// MFCC frontend settings. Defaults: 20 Hz - 4 kHz band, 30 ms window,
/// 10 ms shift, 40 coefficients.
///
/// The pipeline is pre-emphasis -> symmetric Hann window -> zero-padded FFT
/// power spectrum -> triangular HTK mel filterbank spanning the band ->
/// natural log with `log_floor` -> orthonormal DCT-II keeping all
/// `n_mfcc` coefficients. Log energies are log *power*, so scaling the input
/// by a factor a shifts every unfloored log energy by ln(a^2).
struct FrontendConfig {
  double band_low_hz = 20.0;
  double band_high_hz = 4000.0;
  double window_ms = 30.0;
  double shift_ms = 10.0;
  std::size_t n_mfcc = 40;
  double log_floor = 1e-10;
  double pre_emphasis = 0.97;
  std::size_t fft_size = 512;

  std::size_t window_samples() const;
  std::size_t shift_samples() const;
  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Row-major T x n_coeffs matrix; rows are frames.
struct FeatureMatrix {
  std::size_t n_frames = 0;
  std::size_t n_coeffs = 0;
  std::vector<float> values;

  float at(std::size_t frame, std::size_t coeff) const { return values[frame * n_coeffs + coeff]; }
  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// floor((n_samples - window) / shift) + 1, or 0 when shorter than a window.
std::size_t frame_count(std::size_t n_samples, const FrontendConfig& config = {});

/// Zero-pads or truncates at the end to exactly one second. Throws DataError
/// on an empty buffer.
AudioBuffer pad_or_clip(const AudioBuffer& buffer);

/// Time-domain band-pass: 4th-order Butterworth high-pass at band_low_hz
/// cascaded with a 4th-order Butterworth low-pass at band_high_hz. Attenuation
/// is at least 20 dB an octave outside either edge. The MFCC path does not use
/// it; the mel filterbank already spans only the band.
AudioBuffer band_pass(const AudioBuffer& buffer, const FrontendConfig& config = {});

/// Center frequency (Hz) of every mel filter, ascending.
std::vector<double> mel_center_frequencies(const FrontendConfig& config = {});

/// Pre-DCT log mel filterbank energies, T x n_mfcc.
FeatureMatrix log_mel_energies(const AudioBuffer& buffer, const FrontendConfig& config = {});

/// T x n_mfcc MFCC matrix for exactly one second of audio (T = 98 with the
/// defaults). Throws DataError for any other length.
FeatureMatrix extract_mfcc(const AudioBuffer& buffer, const FrontendConfig& config = {});

}  // namespace kws
