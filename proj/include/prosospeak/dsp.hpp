#pragma once

#include <span>
#include <vector>

#include "prosospeak/audio.hpp"
#include "prosospeak/mat.hpp"

namespace prosospeak {

/// Magnitude spectrogram, frames by frequency bins (fft_size/2 + 1).
struct Spectrogram {
  MatD magnitudes;
  double window_len_ms = 0.0;
  double hop_ms = 0.0;
  int fft_size = 0;
  int sample_rate = 0;
};

/// Log mel-band energies, frames by bands.
struct MelSpectrogram {
  MatD values;
  int bands = 0;
  double window_len_ms = 0.0;
  double hop_ms = 0.0;
  int sample_rate = 0;
};

/// Cepstral coefficients, frames by coefficients.
struct MfccMap {
  MatD values;
  int coefficients = 0;
  double window_len_ms = 0.0;
  double hop_ms = 0.0;
  int sample_rate = 0;
};

constexpr double kLogFloor = 1e-10;

double mel_from_hz(double hz);
double hz_from_mel(double mel);

/// Number of analysis frames for a signal: 1 + floor((len - win) / hop) when
/// len >= win, otherwise a single zero-padded frame.
std::size_t frame_count(std::size_t num_samples, std::size_t window_samples,
                        std::size_t hop_samples);

/// Hann-windowed magnitude STFT (one-sided). fft_size must be a power of two
/// and at least the window length in samples.
Spectrogram stft(const AudioBuffer& a, double window_len_ms, double hop_ms, int fft_size);

/// Triangular mel filterbank on the HTK scale, K x (fft_size/2 + 1). Interior
/// filters peak at 1; errors if any band covers no FFT bin.
MatD mel_filterbank(int bands, int fft_size, int sample_rate, double f_min, double f_max);

/// Log mel-spectrogram of the power spectrum, floored at kLogFloor.
MelSpectrogram mel_spectrogram(const AudioBuffer& a, double window_len_ms = 50.0,
                               double hop_ms = 12.5, int bands = 80);

/// MFCCs: orthonormal DCT-II of the 80-band log mel frame, first `coefficients` kept.
MfccMap mfcc(const AudioBuffer& a, double window_len_ms = 25.0, double hop_ms = 10.0,
             int coefficients = 80);

/// Orthonormal DCT-II of v, truncated to the first `count` coefficients.
std::vector<double> dct_ii(std::span<const double> v, int count);

/// In-place radix-2 complex FFT (interleaved re/im pairs). n must be a power of two.
void fft_complex(std::vector<double>& re, std::vector<double>& im);

}  // namespace prosospeak
