#include "prosospeak/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace prosospeak {
namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t window_samples(double ms, int fs) {
  return static_cast<std::size_t>(std::llround(ms * fs / 1000.0));
}

}  // namespace

double mel_from_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double hz_from_mel(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t frame_count(std::size_t num_samples, std::size_t window, std::size_t hop) {
  if (num_samples < window) return 1;
  return 1 + (num_samples - window) / hop;
}

void fft_complex(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  require(im.size() == n, "fft: mismatched re/im lengths");
  require(is_pow2(static_cast<int>(n)), "fft size must be a power of two");

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::size_t a = i + k, b = i + k + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

Spectrogram stft(const AudioBuffer& a, double window_len_ms, double hop_ms, int fft_size) {
  require(!a.samples.empty(), "stft: empty buffer");
  require(a.sample_rate > 0, "stft: non-positive sample rate");
  require(hop_ms > 0.0, "stft: hop must be positive");
  require(is_pow2(fft_size), "stft: fft_size must be a power of two");

  const std::size_t win = window_samples(window_len_ms, a.sample_rate);
  const std::size_t hop = window_samples(hop_ms, a.sample_rate);
  require(win > 0 && hop > 0, "stft: window and hop must be at least one sample");
  require(win <= static_cast<std::size_t>(fft_size), "stft: window exceeds fft_size");

  const std::size_t frames = frame_count(a.samples.size(), win, hop);
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;

  std::vector<double> hann(win);
  for (std::size_t i = 0; i < win; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(win)));

  Spectrogram s;
  s.magnitudes = MatD(frames, bins);
  s.window_len_ms = window_len_ms;
  s.hop_ms = hop_ms;
  s.fft_size = fft_size;
  s.sample_rate = a.sample_rate;

  std::vector<double> re(fft_size), im(fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < win; ++i) {
      const std::size_t idx = start + i;
      if (idx < a.samples.size()) re[i] = a.samples[idx] * hann[i];
    }
    fft_complex(re, im);
    double* row = s.magnitudes.row(f);
    for (std::size_t b = 0; b < bins; ++b) row[b] = std::hypot(re[b], im[b]);
  }
  return s;
}

MatD mel_filterbank(int bands, int fft_size, int sample_rate, double f_min, double f_max) {
  require(bands >= 1, "mel_filterbank: need at least one band");
  require(is_pow2(fft_size), "mel_filterbank: fft_size must be a power of two");
  require(sample_rate > 0, "mel_filterbank: non-positive sample rate");
  require(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0,
          "mel_filterbank: need 0 <= f_min < f_max <= fs/2");

  const int bins = fft_size / 2 + 1;
  const double mel_lo = mel_from_hz(f_min);
  const double mel_hi = mel_from_hz(f_max);
  std::vector<double> centers_hz(bands + 2);
  for (int i = 0; i < bands + 2; ++i)
    centers_hz[i] = hz_from_mel(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));

  MatD fb(bands, bins);
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int k = 0; k < bands; ++k) {
    const double lo = centers_hz[k], mid = centers_hz[k + 1], hi = centers_hz[k + 2];
    double row_sum = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb(k, b) = w;
      row_sum += w;
    }
    if (row_sum <= 0.0)
      fail("mel_filterbank: band " + std::to_string(k) +
           " covers no FFT bin (adjacent centers collapse; reduce bands or "
           "increase fft_size)");
  }
  return fb;
}

namespace {

MelSpectrogram log_mel(const AudioBuffer& a, double window_len_ms, double hop_ms, int bands) {
  const std::size_t win = window_samples(window_len_ms, a.sample_rate);
  const int fft_size = next_pow2(static_cast<int>(win));
  Spectrogram s = stft(a, window_len_ms, hop_ms, fft_size);
  MatD fb = mel_filterbank(bands, fft_size, a.sample_rate, 0.0, a.sample_rate / 2.0);

  MelSpectrogram m;
  m.values = MatD(s.magnitudes.rows(), bands);
  m.bands = bands;
  m.window_len_ms = window_len_ms;
  m.hop_ms = hop_ms;
  m.sample_rate = a.sample_rate;

  const std::size_t bins = s.magnitudes.cols();
  std::vector<double> power(bins);
  for (std::size_t f = 0; f < s.magnitudes.rows(); ++f) {
    const double* mag = s.magnitudes.row(f);
    for (std::size_t b = 0; b < bins; ++b) power[b] = mag[b] * mag[b];
    for (int k = 0; k < bands; ++k) {
      const double* w = fb.row(k);
      double acc = 0.0;
      for (std::size_t b = 0; b < bins; ++b) acc += w[b] * power[b];
      m.values(f, k) = std::log(std::max(acc, kLogFloor));
    }
  }
  return m;
}

}  // namespace

MelSpectrogram mel_spectrogram(const AudioBuffer& a, double window_len_ms, double hop_ms,
                               int bands) {
  return log_mel(a, window_len_ms, hop_ms, bands);
}

MfccMap mfcc(const AudioBuffer& a, double window_len_ms, double hop_ms, int coefficients) {
  constexpr int kInternalBands = 80;
  require(coefficients >= 1 && coefficients <= kInternalBands,
          "mfcc: coefficient count out of range");
  MelSpectrogram m = log_mel(a, window_len_ms, hop_ms, kInternalBands);

  MfccMap out;
  out.values = MatD(m.values.rows(), coefficients);
  out.coefficients = coefficients;
  out.window_len_ms = window_len_ms;
  out.hop_ms = hop_ms;
  out.sample_rate = a.sample_rate;
  for (std::size_t f = 0; f < m.values.rows(); ++f) {
    std::vector<double> c =
        dct_ii(std::span<const double>(m.values.row(f), kInternalBands), coefficients);
    std::copy(c.begin(), c.end(), out.values.row(f));
  }
  return out;
}

std::vector<double> dct_ii(std::span<const double> v, int count) {
  const int k = static_cast<int>(v.size());
  require(count >= 1 && count <= k, "dct_ii: count out of range");
  std::vector<double> out(count);
  const double a0 = std::sqrt(1.0 / k);
  const double aj = std::sqrt(2.0 / k);
  for (int j = 0; j < count; ++j) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += v[i] * std::cos(kPi * (2.0 * i + 1.0) * j / (2.0 * k));
    out[j] = (j == 0 ? a0 : aj) * acc;
  }
  return out;
}

}  // namespace prosospeak
