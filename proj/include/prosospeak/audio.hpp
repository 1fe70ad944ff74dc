#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "prosospeak/common.hpp"

namespace prosospeak {

/// Mono speech signal, samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class DegradationLabel { none, br128, br64, br32 };

std::string to_string(DegradationLabel label);
DegradationLabel degradation_label_from_string(const std::string& s);

/// Hermetic stand-in for MP3 compression at a given bitrate: a low-pass at
/// cutoff_hz followed by amplitude quantization to quant_levels.
struct DegradationProfile {
  DegradationLabel label = DegradationLabel::none;
  double cutoff_hz = 0.0;
  int quant_levels = 0;

  static DegradationProfile from_label(DegradationLabel label);
  static DegradationProfile from_label(const std::string& label);
};

/// Decode a PCM WAV file (8/16/24-bit integer or 32-bit float, any channel
/// count). Channels are averaged to mono; integer samples scale to [-1, 1].
AudioBuffer load_wav(const std::filesystem::path& path);

/// Write a mono 16-bit PCM WAV file.
void save_wav(const std::filesystem::path& path, const AudioBuffer& a);

/// Band-limited rate conversion with a Kaiser-windowed sinc kernel.
/// Equal rates return the input unchanged.
AudioBuffer resample(const AudioBuffer& a, int target_fs);

/// Apply a degradation profile. Output has the same length and rate; the
/// `none` profile is the identity. Never increases total signal energy.
AudioBuffer degrade(const AudioBuffer& a, const DegradationProfile& p);

}  // namespace prosospeak
