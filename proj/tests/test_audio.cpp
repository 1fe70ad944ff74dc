#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "prosospeak/audio.hpp"
#include "prosospeak/dsp.hpp"
#include "prosospeak/rng.hpp"

using namespace prosospeak;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path() / "prosospeak_audio_tests";

struct TmpDir {
  TmpDir() { std::filesystem::create_directories(kTmp); }
} tmp_dir_init;

void append_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
void append_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xFF));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

std::filesystem::path write_wav_bytes(const std::string& name, int format, int channels,
                                      int rate, int bits,
                                      const std::vector<unsigned char>& data) {
  std::vector<unsigned char> b;
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  append_u32(b, static_cast<std::uint32_t>(36 + data.size()));
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  append_u32(b, 16);
  append_u16(b, static_cast<std::uint16_t>(format));
  append_u16(b, static_cast<std::uint16_t>(channels));
  append_u32(b, static_cast<std::uint32_t>(rate));
  append_u32(b, static_cast<std::uint32_t>(rate * channels * bits / 8));
  append_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
  append_u16(b, static_cast<std::uint16_t>(bits));
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  append_u32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());

  const std::filesystem::path path = kTmp / name;
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  return path;
}

AudioBuffer sine(double freq, double seconds, int fs, double amp = 1.0) {
  AudioBuffer a;
  a.sample_rate = fs;
  const auto n = static_cast<std::size_t>(seconds * fs);
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = amp * std::sin(2.0 * 3.14159265358979323846 * freq * i / fs);
  return a;
}

AudioBuffer white_noise(double seconds, int fs, std::uint64_t seed, double amp = 0.5) {
  RandomSource rng(seed);
  AudioBuffer a;
  a.sample_rate = fs;
  a.samples.resize(static_cast<std::size_t>(seconds * fs));
  for (auto& s : a.samples) s = amp * (2.0 * rng.uniform() - 1.0);
  return a;
}

/// Energy above cutoff measured through the library STFT on magnitudes^2.
double band_energy_above(const AudioBuffer& a, double cutoff_hz) {
  Spectrogram s = stft(a, 25.0, 10.0, 512);
  const double bin_hz = static_cast<double>(a.sample_rate) / s.fft_size;
  double e = 0.0;
  for (std::size_t f = 0; f < s.magnitudes.rows(); ++f)
    for (std::size_t b = 0; b < s.magnitudes.cols(); ++b)
      if (b * bin_hz > cutoff_hz) e += s.magnitudes(f, b) * s.magnitudes(f, b);
  return e;
}

}  // namespace

TEST_CASE("load_wav scales a full-scale 16-bit stereo file") {
  std::vector<unsigned char> data;
  for (int i = 0; i < 100; ++i) {
    append_u16(data, 32767);  // L
    append_u16(data, 32767);  // R
  }
  auto path = write_wav_bytes("full_scale_stereo.wav", 1, 2, 16000, 16, data);
  AudioBuffer a = load_wav(path);
  REQUIRE(a.samples.size() == 100);
  for (double s : a.samples) CHECK(s == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
}

TEST_CASE("load_wav keeps mono 16 kHz content as-is") {
  AudioBuffer src = sine(440.0, 1.0, 16000, 0.5);
  auto path = kTmp / "mono16k.wav";
  save_wav(path, src);
  AudioBuffer a = load_wav(path);
  CHECK(a.sample_rate == 16000);
  CHECK(a.samples.size() == 16000);
  for (std::size_t i = 0; i < a.samples.size(); i += 997)
    CHECK(a.samples[i] == doctest::Approx(src.samples[i]).epsilon(1e-3));
}

TEST_CASE("load_wav accepts silence") {
  std::vector<unsigned char> data(2 * 1600, 0);
  auto path = write_wav_bytes("silence.wav", 1, 1, 16000, 16, data);
  AudioBuffer a = load_wav(path);
  CHECK(a.samples.size() == 1600);
  for (double s : a.samples) CHECK(s == 0.0);
}

TEST_CASE("load_wav decodes 8-bit, 24-bit and float formats") {
  {  // 8-bit unsigned: 255 -> (255-128)/128
    std::vector<unsigned char> data(64, 255);
    AudioBuffer a = load_wav(write_wav_bytes("u8.wav", 1, 1, 8000, 8, data));
    CHECK(a.samples[0] == doctest::Approx(127.0 / 128.0));
  }
  {  // 24-bit signed full scale
    std::vector<unsigned char> data;
    for (int i = 0; i < 32; ++i) {
      data.push_back(0xFF);
      data.push_back(0xFF);
      data.push_back(0x7F);
    }
    AudioBuffer a = load_wav(write_wav_bytes("s24.wav", 1, 1, 8000, 24, data));
    CHECK(a.samples[0] == doctest::Approx(8388607.0 / 8388608.0).epsilon(1e-12));
  }
  {  // 32-bit float 0.25
    std::vector<unsigned char> data;
    const float v = 0.25f;
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int i = 0; i < 16; ++i) append_u32(data, u);
    AudioBuffer a = load_wav(write_wav_bytes("f32.wav", 3, 1, 8000, 32, data));
    CHECK(a.samples[0] == doctest::Approx(0.25));
  }
}

TEST_CASE("load_wav error paths") {
  CHECK_THROWS_AS(load_wav(kTmp / "does_not_exist.wav"), Error);
  {
    auto path = kTmp / "not_a_wav.wav";
    std::ofstream(path) << "definitely not RIFF data";
    CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("not a RIFF"), Error);
  }
  {
    std::vector<unsigned char> empty;
    auto path = write_wav_bytes("zero_len.wav", 1, 1, 16000, 16, empty);
    CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("zero-length"), Error);
  }
  {
    std::vector<unsigned char> data(32, 0);
    auto path = write_wav_bytes("alaw.wav", 6, 1, 8000, 8, data);  // A-law format tag
    CHECK_THROWS_WITH_AS(load_wav(path), doctest::Contains("unsupported"), Error);
  }
}

TEST_CASE("resample at the source rate is bitwise identity") {
  AudioBuffer a = white_noise(0.3, 16000, 11);
  AudioBuffer b = resample(a, 16000);
  CHECK(b.samples == a.samples);
  CHECK(b.sample_rate == 16000);
}

TEST_CASE("resample 48k->16k keeps a 1 kHz tone at 1 kHz") {
  AudioBuffer a = sine(1000.0, 1.0, 48000, 0.8);
  AudioBuffer b = resample(a, 16000);
  CHECK(b.sample_rate == 16000);
  CHECK(b.samples.size() == 16000);

  Spectrogram s = stft(b, 25.0, 10.0, 512);
  // average spectrum, then locate the dominant bin
  std::vector<double> avg(s.magnitudes.cols(), 0.0);
  for (std::size_t f = 0; f < s.magnitudes.rows(); ++f)
    for (std::size_t c = 0; c < s.magnitudes.cols(); ++c) avg[c] += s.magnitudes(f, c);
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(avg.begin(), avg.end()) - avg.begin());
  CHECK(peak == 32);  // 1000 * 512 / 16000
}

TEST_CASE("resample removes content above the target Nyquist") {
  AudioBuffer a = sine(7900.0, 1.0, 16000, 0.9);
  AudioBuffer b = resample(a, 8000);
  const double e_in = oracle::total_energy(a.samples);
  const double e_out = oracle::total_energy(b.samples);
  CHECK(e_out <= 1e-4 * e_in);  // >= 40 dB down
}

TEST_CASE("resample round trip preserves a pure tone's peak bin") {
  for (double freq : {500.0, 1500.0, 3000.0}) {
    AudioBuffer a = sine(freq, 0.5, 16000, 0.7);
    AudioBuffer b = resample(resample(a, 8000), 16000);
    Spectrogram sa = stft(a, 25.0, 10.0, 512);
    Spectrogram sb = stft(b, 25.0, 10.0, 512);
    auto peak_of = [](const Spectrogram& s) {
      std::vector<double> avg(s.magnitudes.cols(), 0.0);
      for (std::size_t f = 0; f < s.magnitudes.rows(); ++f)
        for (std::size_t c = 0; c < s.magnitudes.cols(); ++c) avg[c] += s.magnitudes(f, c);
      return std::max_element(avg.begin(), avg.end()) - avg.begin();
    };
    CHECK(peak_of(sa) == peak_of(sb));
  }
}

TEST_CASE("resample rejects non-positive rates") {
  AudioBuffer a = sine(440.0, 0.1, 16000);
  CHECK_THROWS_AS(resample(a, 0), Error);
  CHECK_THROWS_AS(resample(a, -8000), Error);
}

TEST_CASE("degrade profile none is bitwise identity") {
  AudioBuffer a = white_noise(0.4, 16000, 3);
  AudioBuffer b = degrade(a, DegradationProfile::from_label(DegradationLabel::none));
  CHECK(b.samples == a.samples);
}

TEST_CASE("degrade br32 attenuates the band above its cutoff by 40 dB") {
  AudioBuffer a = white_noise(1.0, 16000, 5, 0.95);  // full-scale input
  DegradationProfile p = DegradationProfile::from_label(DegradationLabel::br32);
  AudioBuffer b = degrade(a, p);
  REQUIRE(b.samples.size() == a.samples.size());
  REQUIRE(b.sample_rate == a.sample_rate);
  const double in_band = band_energy_above(a, p.cutoff_hz);
  const double out_band = band_energy_above(b, p.cutoff_hz);
  CHECK(out_band <= 1e-4 * in_band);
}

TEST_CASE("degrade br32 is noisier than br128 on the same input") {
  AudioBuffer a = white_noise(1.0, 16000, 7, 0.4);
  AudioBuffer b128 = degrade(a, DegradationProfile::from_label(DegradationLabel::br128));
  AudioBuffer b32 = degrade(a, DegradationProfile::from_label(DegradationLabel::br32));
  auto snr = [&](const AudioBuffer& d) {
    double err = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      const double e = a.samples[i] - d.samples[i];
      err += e * e;
    }
    return oracle::total_energy(a.samples) / err;
  };
  CHECK(snr(b32) < snr(b128));
}

TEST_CASE("degrade is deterministic and never adds energy") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    AudioBuffer a = white_noise(0.5, 16000, seed, 0.8);
    for (auto label : {DegradationLabel::br128, DegradationLabel::br64, DegradationLabel::br32}) {
      DegradationProfile p = DegradationProfile::from_label(label);
      AudioBuffer d1 = degrade(a, p);
      AudioBuffer d2 = degrade(a, p);
      CHECK(d1.samples == d2.samples);
      CHECK(oracle::total_energy(d1.samples) <= oracle::total_energy(a.samples));
    }
  }
  // pure passband tone is the adversarial case for the energy bound
  AudioBuffer tone = sine(1000.0, 0.5, 16000, 0.95);
  AudioBuffer d = degrade(tone, DegradationProfile::from_label(DegradationLabel::br128));
  CHECK(oracle::total_energy(d.samples) <= oracle::total_energy(tone.samples));
}

TEST_CASE("degrade validates its profile") {
  AudioBuffer a = sine(440.0, 0.1, 16000);
  DegradationProfile bad{DegradationLabel::br32, 9000.0, 256};  // cutoff above Nyquist
  CHECK_THROWS_AS(degrade(a, bad), Error);
  DegradationProfile bad2{DegradationLabel::br32, 4000.0, 1};
  CHECK_THROWS_AS(degrade(a, bad2), Error);
}

TEST_CASE("save_wav round trip stays within one quantization step") {
  AudioBuffer a = sine(700.0, 0.25, 16000, 0.6);
  auto path = kTmp / "roundtrip.wav";
  save_wav(path, a);
  AudioBuffer b = load_wav(path);
  REQUIRE(b.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(std::abs(a.samples[i] - b.samples[i]) <= 1.0 / 32768.0);
}
