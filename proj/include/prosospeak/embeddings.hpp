#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prosospeak/dsp.hpp"
#include "prosospeak/mat.hpp"
#include "prosospeak/tensor_archive.hpp"

namespace prosospeak {

enum class EmbeddingKind { speaker, prosody, combined };

std::string to_string(EmbeddingKind k);

/// Fixed-length embedding; length is out_dim of the producing encoder
/// (speaker and prosody) or their sum (combined).
struct EmbeddingVector {
  std::vector<float> values;
  EmbeddingKind kind = EmbeddingKind::speaker;
};

/// ECAPA-style speaker encoder: conv stem, SE-Res2 blocks with dilated
/// convolutions, multi-block aggregation, channel-dependent attentive
/// statistics pooling, linear projection.
struct SpeakerEncoderConfig {
  int input_dim = 80;
  int channels = 512;
  int num_blocks = 3;
  std::vector<int> dilations = {2, 3, 4};
  int scale = 8;         // Res2 sub-group count
  int se_hidden = 128;   // squeeze-excitation bottleneck
  int agg_channels = 1536;
  int att_hidden = 128;
  int out_dim = 192;

  void validate() const;
  nlohmann::json to_json() const;
  static SpeakerEncoderConfig from_json(const nlohmann::json& j);
};

/// Reference-encoder style prosody encoder: six 3x3 stride-2 convolutions
/// over the mel map, a GRU over the remaining time axis, and a tanh
/// projection of the final hidden state.
struct ProsodyEncoderConfig {
  int mel_bands = 80;
  std::vector<int> conv_channels = {32, 32, 64, 64, 128, 128};
  int gru_hidden = 128;
  int out_dim = 128;
  int min_frames = 64;  // six stride-2 reductions need 2^6 frames

  void validate() const;
  nlohmann::json to_json() const;
  static ProsodyEncoderConfig from_json(const nlohmann::json& j);
};

inline constexpr const char* kSpeakerArchitectureId = "speaker-ecapa-v1";
inline constexpr const char* kProsodyArchitectureId = "prosody-refenc-v1";

/// Load a weight archive and validate it against the architecture config
/// declared in its own metadata.
TensorArchive load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const TensorArchive& archive);

/// Errors unless the archive holds every tensor of the architecture with the
/// exact shape, naming the first offender.
void validate_speaker_archive(const TensorArchive& w, const SpeakerEncoderConfig& cfg);
void validate_prosody_archive(const TensorArchive& w, const ProsodyEncoderConfig& cfg);

/// Seeded random archives: weights drawn N(0, 1/fan_in), zero biases,
/// identity batch-norm statistics. Equal seeds give identical files.
TensorArchive init_speaker_archive(std::uint64_t seed, const SpeakerEncoderConfig& cfg);
TensorArchive init_prosody_archive(std::uint64_t seed, const ProsodyEncoderConfig& cfg);

SpeakerEncoderConfig speaker_config_of(const TensorArchive& w);
ProsodyEncoderConfig prosody_config_of(const TensorArchive& w);

EmbeddingVector speaker_embed(const MfccMap& m, const TensorArchive& w,
                              const SpeakerEncoderConfig& cfg);
EmbeddingVector prosody_embed(const MelSpectrogram& m, const TensorArchive& w,
                              const ProsodyEncoderConfig& cfg);

/// Attention parameters for the statistics pooling: scores are a two-layer
/// tanh network over each frame vector concatenated with global mean/std
/// context, softmax-normalized over time per channel.
struct AttentionParams {
  MatF w1;                 // hidden x 3C
  std::vector<float> b1;   // hidden
  MatF w2;                 // C x hidden
  std::vector<float> b2;   // C
};

/// h is channels x frames; returns [weighted means; weighted stds] (2C).
/// weights_out, when given, receives the C x M attention weights.
std::vector<float> attentive_stats_pool(const MatF& h, const AttentionParams& att,
                                        MatF* weights_out = nullptr);

/// Standard GRU cell weights, gates stacked [reset; update; candidate].
struct GruWeights {
  MatF w_ih;               // 3H x D
  MatF w_hh;               // 3H x H
  std::vector<float> b_ih; // 3H
  std::vector<float> b_hh; // 3H
};

/// Runs the recurrence over seq (T x D) from a zero initial state and
/// returns the final hidden state (H).
std::vector<float> gru_forward(const MatF& seq, const GruWeights& w);

}  // namespace prosospeak
