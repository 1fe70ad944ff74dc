#include "prosospeak/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace prosospeak {
namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::string to_string(DegradationLabel label) {
  switch (label) {
    case DegradationLabel::none: return "none";
    case DegradationLabel::br128: return "br128";
    case DegradationLabel::br64: return "br64";
    case DegradationLabel::br32: return "br32";
  }
  fail("invalid degradation label");
}

DegradationLabel degradation_label_from_string(const std::string& s) {
  if (s == "none") return DegradationLabel::none;
  if (s == "br128") return DegradationLabel::br128;
  if (s == "br64") return DegradationLabel::br64;
  if (s == "br32") return DegradationLabel::br32;
  fail("unknown degradation profile '" + s + "' (expected none|br128|br64|br32)");
}

DegradationProfile DegradationProfile::from_label(DegradationLabel label) {
  switch (label) {
    case DegradationLabel::none: return {label, 0.0, 0};
    case DegradationLabel::br128: return {label, 7000.0, 4096};
    case DegradationLabel::br64: return {label, 5500.0, 1024};
    case DegradationLabel::br32: return {label, 4000.0, 256};
  }
  fail("invalid degradation label");
}

DegradationProfile DegradationProfile::from_label(const std::string& label) {
  return from_label(degradation_label_from_string(label));
}

namespace {

struct ByteReader {
  const std::vector<unsigned char>& bytes;
  size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  size_t remaining() const { return bytes.size() - pos; }

  void need(size_t n, const char* what) {
    if (remaining() < n) fail(std::string("truncated WAV file while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = bytes[pos] | (bytes[pos + 1] << 8) | (bytes[pos + 2] << 16) |
                      (std::uint32_t(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::string tag() {
    need(4, "chunk tag");
    std::string t(reinterpret_cast<const char*>(&bytes[pos]), 4);
    pos += 4;
    return t;
  }
};

double decode_sample(const unsigned char* p, int bits, bool is_float) {
  if (is_float) {
    std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    double d = static_cast<double>(f);
    if (!std::isfinite(d)) fail("non-finite sample in float WAV data");
    return std::clamp(d, -1.0, 1.0);
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
      std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign extend
      return v / 8388608.0;
    }
    default:
      fail("unsupported WAV bit depth " + std::to_string(bits));
  }
}

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  ByteReader r{bytes};

  if (r.tag() != "RIFF") fail("not a RIFF/WAVE file: " + path.string());
  r.u32("RIFF size");
  if (r.tag() != "WAVE") fail("not a RIFF/WAVE file: " + path.string());

  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  int format = 0;
  bool have_fmt = false;
  const unsigned char* data_ptr = nullptr;
  size_t data_len = 0;

  while (r.remaining() >= 8) {
    std::string tag = r.tag();
    std::uint32_t size = r.u32("chunk size");
    if (size > r.remaining()) size = static_cast<std::uint32_t>(r.remaining());
    if (tag == "fmt ") {
      ByteReader f{bytes};
      f.pos = r.pos;
      format = f.u16("format");
      channels = f.u16("channels");
      sample_rate = static_cast<int>(f.u32("sample rate"));
      f.u32("byte rate");
      f.u16("block align");
      bits = f.u16("bits per sample");
      if (format == 0xFFFE && size >= 26) {  // WAVE_FORMAT_EXTENSIBLE
        f.u16("extension size");
        f.u16("valid bits");
        f.u32("channel mask");
        format = f.u16("subformat");
      }
      have_fmt = true;
    } else if (tag == "data") {
      data_ptr = bytes.data() + r.pos;
      data_len = size;
    }
    r.pos += size + (size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) fail("WAV file has no fmt chunk: " + path.string());
  if (data_ptr == nullptr) fail("WAV file has no data chunk: " + path.string());
  if (channels < 1) fail("WAV file declares zero channels: " + path.string());
  if (sample_rate <= 0) fail("WAV file declares non-positive sample rate");

  bool is_float = false;
  if (format == 3) {
    if (bits != 32) fail("only 32-bit float WAV is supported");
    is_float = true;
  } else if (format == 1) {
    if (bits != 8 && bits != 16 && bits != 24)
      fail("unsupported PCM bit depth " + std::to_string(bits) +
           " (expected 8, 16 or 24)");
  } else {
    fail("unsupported WAV encoding (format tag " + std::to_string(format) + ")");
  }

  int bytes_per_sample = bits / 8;
  size_t frame_size = static_cast<size_t>(bytes_per_sample) * channels;
  size_t frames = data_len / frame_size;
  if (frames == 0) fail("zero-length audio in " + path.string());

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    const unsigned char* fp = data_ptr + i * frame_size;
    for (int c = 0; c < channels; ++c)
      acc += decode_sample(fp + c * bytes_per_sample, bits, is_float);
    out.samples[i] = acc / channels;
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& a) {
  require(!a.samples.empty(), "refusing to write empty audio buffer");
  require(a.sample_rate > 0, "audio buffer has non-positive sample rate");

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write WAV file: " + path.string());

  auto w16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };
  auto w32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };

  std::uint32_t data_size = static_cast<std::uint32_t>(a.samples.size() * 2);
  out.write("RIFF", 4);
  w32(36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(static_cast<std::uint32_t>(a.sample_rate));
  w32(static_cast<std::uint32_t>(a.sample_rate * 2));
  w16(2);
  w16(16);
  out.write("data", 4);
  w32(data_size);
  for (double s : a.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    // scale matches the loader (x / 32768), clipped at the int16 ceiling
    long v = std::lround(c * 32768.0);
    v = std::clamp(v, -32768L, 32767L);
    w16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  if (!out) fail("short write to " + path.string());
}

namespace {

double bessel_i0(double x) {
  // Power series; converges quickly for the argument range used here.
  double sum = 1.0, term = 1.0;
  double half = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double kaiser(double t, double half_width, double beta) {
  double r = t / half_width;
  double arg = 1.0 - r * r;
  if (arg < 0.0) return 0.0;
  return bessel_i0(beta * std::sqrt(arg)) / bessel_i0(beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  double px = kPi * x;
  return std::sin(px) / px;
}

/// Linear-phase low-pass FIR, Kaiser beta=8, unit DC gain, peak gain
/// normalized to <= 1 so filtering never adds energy.
std::vector<double> design_lowpass(double cutoff_hz, int sample_rate, int taps) {
  double fc = cutoff_hz / sample_rate;  // cycles per sample
  int half = taps / 2;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    double t = i - half;
    h[i] = 2.0 * fc * sinc(2.0 * fc * t) * kaiser(t, half + 1.0, 8.0);
    sum += h[i];
  }
  for (double& v : h) v /= sum;

  // Scan the magnitude response and scale down so |H| <= 1 everywhere.
  double peak = 0.0;
  for (int k = 0; k <= 2048; ++k) {
    double w = kPi * k / 2048.0;
    double re = 0.0, im = 0.0;
    for (int i = 0; i < taps; ++i) {
      re += h[i] * std::cos(w * i);
      im -= h[i] * std::sin(w * i);
    }
    peak = std::max(peak, std::hypot(re, im));
  }
  if (peak > 1.0)
    for (double& v : h) v /= peak;
  return h;
}

std::vector<double> convolve_centered(const std::vector<double>& x,
                                      const std::vector<double>& h) {
  int n = static_cast<int>(x.size());
  int m = static_cast<int>(h.size());
  int half = m / 2;
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    int k_lo = std::max(0, i + half - n + 1);
    int k_hi = std::min(m - 1, i + half);
    for (int k = k_lo; k <= k_hi; ++k) acc += h[k] * x[i + half - k];
    y[i] = acc;
  }
  return y;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& a, int target_fs) {
  require(target_fs > 0, "resample target rate must be positive");
  require(!a.samples.empty(), "cannot resample empty buffer");
  if (target_fs == a.sample_rate) return a;

  double ratio = static_cast<double>(target_fs) / a.sample_rate;
  // 64 taps per output phase; the kernel stretches when downsampling so the
  // cutoff tracks the target Nyquist.
  double stretch = std::max(1.0, 1.0 / ratio);
  double fc = 0.5 / stretch;           // cycles per source sample
  double half_width = 32.0 * stretch;  // source samples each side

  auto n_in = static_cast<std::int64_t>(a.samples.size());
  auto n_out = std::max<std::int64_t>(1, std::llround(n_in * ratio));

  AudioBuffer out;
  out.sample_rate = target_fs;
  out.samples.resize(static_cast<size_t>(n_out));
  for (std::int64_t i = 0; i < n_out; ++i) {
    double center = i / ratio;
    auto k_lo = static_cast<std::int64_t>(std::ceil(center - half_width));
    auto k_hi = static_cast<std::int64_t>(std::floor(center + half_width));
    k_lo = std::max<std::int64_t>(k_lo, 0);
    k_hi = std::min<std::int64_t>(k_hi, n_in - 1);
    double acc = 0.0, wsum = 0.0;
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      double t = k - center;
      double w = 2.0 * fc * sinc(2.0 * fc * t) * kaiser(t, half_width, 8.0);
      acc += w * a.samples[static_cast<size_t>(k)];
      wsum += w;
    }
    // Dividing by the kernel sum pins DC gain at 1 for every fractional phase.
    out.samples[static_cast<size_t>(i)] = std::abs(wsum) > 1e-12 ? acc / wsum : 0.0;
  }
  return out;
}

AudioBuffer degrade(const AudioBuffer& a, const DegradationProfile& p) {
  require(!a.samples.empty(), "cannot degrade empty buffer");
  if (p.label == DegradationLabel::none) return a;
  require(p.quant_levels >= 2, "degradation profile needs at least 2 quantization levels");
  require(p.cutoff_hz > 0.0 && p.cutoff_hz < a.sample_rate / 2.0,
          "degradation cutoff must lie below Nyquist");

  // Passband edge sits below the nominal cutoff so the stop band starts at
  // cutoff_hz itself.
  int taps = 257;
  double transition = 0.04 * (a.sample_rate / 2.0);
  double edge = std::max(p.cutoff_hz * 0.5, p.cutoff_hz - transition);
  std::vector<double> h = design_lowpass(edge, a.sample_rate, taps);
  std::vector<double> filtered = convolve_centered(a.samples, h);

  double scale = std::floor(p.quant_levels / 2.0);
  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  out.samples.resize(filtered.size());
  for (size_t i = 0; i < filtered.size(); ++i) {
    double c = std::clamp(filtered[i], -1.0, 1.0);
    out.samples[i] = std::trunc(c * scale) / scale;  // toward zero: |q| <= |x|
  }
  return out;
}

}  // namespace prosospeak
