#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "prosospeak/embeddings.hpp"
#include "prosospeak/rng.hpp"

using namespace prosospeak;

namespace {

const std::filesystem::path kTmp =
    std::filesystem::temp_directory_path() / "prosospeak_embedding_tests";

struct TmpDir {
  TmpDir() { std::filesystem::create_directories(kTmp); }
} tmp_dir_init;

/// Small encoder configs keep the forward passes fast; output dims stay at
/// the full 192/128.
SpeakerEncoderConfig desk_speaker() {
  SpeakerEncoderConfig cfg;
  cfg.channels = 64;
  cfg.scale = 4;
  cfg.se_hidden = 16;
  cfg.agg_channels = 96;
  cfg.att_hidden = 24;
  return cfg;
}

ProsodyEncoderConfig desk_prosody() {
  ProsodyEncoderConfig cfg;
  cfg.conv_channels = {8, 8, 16, 16, 32, 32};
  cfg.gru_hidden = 48;
  return cfg;
}

MfccMap random_mfcc(std::size_t frames, int dim, std::uint64_t seed) {
  RandomSource rng(seed);
  MfccMap m;
  m.values = MatD(frames, static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.normal();
  m.coefficients = dim;
  return m;
}

MelSpectrogram random_mel(std::size_t frames, int bands, std::uint64_t seed) {
  RandomSource rng(seed);
  MelSpectrogram m;
  m.values = MatD(frames, static_cast<std::size_t>(bands));
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.normal();
  m.bands = bands;
  return m;
}

std::uint64_t blob_hash(const TensorArchive& a) {
  std::uint64_t h = 1469598103934665603ull;
  for (float f : a.blob()) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) {
      h ^= (u >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("weight archive round trip is bitwise") {
  TensorArchive a = init_speaker_archive(7, desk_speaker());
  const auto path = kTmp / "speaker7.psw";
  save_weights(path, a);
  TensorArchive b = load_weights(path);
  CHECK(b.blob() == a.blob());
  CHECK(b.entries().size() == a.entries().size());
  CHECK(b.metadata.at("architecture") == a.metadata.at("architecture"));
}

TEST_CASE("seeded init is deterministic") {
  TensorArchive a = init_speaker_archive(7, desk_speaker());
  TensorArchive b = init_speaker_archive(7, desk_speaker());
  CHECK(blob_hash(a) == blob_hash(b));
  TensorArchive c = init_speaker_archive(8, desk_speaker());
  CHECK(blob_hash(a) != blob_hash(c));
}

TEST_CASE("archive validation names the offending tensor") {
  TensorArchive a = init_prosody_archive(1, desk_prosody());
  // claim a different gru width than the stored tensors
  ProsodyEncoderConfig wrong = desk_prosody();
  wrong.gru_hidden = 32;
  CHECK_THROWS_WITH_AS(validate_prosody_archive(a, wrong), doctest::Contains("gru.w_ih"),
                       Error);
  CHECK_THROWS_WITH_AS(validate_prosody_archive(a, wrong), doctest::Contains("expected"),
                       Error);
}

TEST_CASE("load_weights rejects unknown format versions") {
  // hand-build an archive file with a bumped version field
  const auto path = kTmp / "bad_version.psw";
  {
    std::string header = R"({"format_version":99,"metadata":{},"tensors":[]})";
    std::ofstream out(path, std::ios::binary);
    out.write("PSARCH1\n", 8);
    std::uint64_t n = header.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
  }
  CHECK_THROWS_WITH_AS(load_weights(path), doctest::Contains("version"), Error);
}

TEST_CASE("load_weights rejects non-finite values") {
  TensorArchive a = init_speaker_archive(3, desk_speaker());
  TensorArchive poisoned;
  poisoned.metadata = a.metadata;
  for (const auto& e : a.entries()) {
    std::vector<float> v = a.tensor(e.name);
    if (e.name == "proj.bias") v[0] = std::numeric_limits<float>::quiet_NaN();
    poisoned.add(e.name, e.shape, std::move(v));
  }
  const auto path = kTmp / "nan.psw";
  save_archive(path, poisoned);
  CHECK_THROWS_WITH_AS(load_weights(path), doctest::Contains("proj.bias"), Error);
}

TEST_CASE("speaker embedding length is 192 regardless of input frames") {
  SpeakerEncoderConfig cfg = desk_speaker();
  TensorArchive w = init_speaker_archive(21, cfg);
  for (std::size_t frames : {1u, 50u, 500u}) {
    EmbeddingVector e = speaker_embed(random_mfcc(frames, cfg.input_dim, frames), w, cfg);
    CHECK(e.kind == EmbeddingKind::speaker);
    CHECK(e.values.size() == 192);
    for (float v : e.values) CHECK(std::isfinite(v));
  }
}

TEST_CASE("time-constant input embeds identically when frames are duplicated") {
  SpeakerEncoderConfig cfg = desk_speaker();
  TensorArchive w = init_speaker_archive(5, cfg);
  RandomSource rng(99);
  std::vector<double> frame(static_cast<std::size_t>(cfg.input_dim));
  for (auto& v : frame) v = rng.normal();

  auto tiled = [&](std::size_t frames) {
    MfccMap m;
    m.values = MatD(frames, frame.size());
    for (std::size_t f = 0; f < frames; ++f)
      std::copy(frame.begin(), frame.end(), m.values.row(f));
    m.coefficients = cfg.input_dim;
    return m;
  };
  EmbeddingVector a = speaker_embed(tiled(40), w, cfg);
  EmbeddingVector b = speaker_embed(tiled(80), w, cfg);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6);
}

TEST_CASE("speaker embedding is deterministic") {
  SpeakerEncoderConfig cfg = desk_speaker();
  TensorArchive w = init_speaker_archive(17, cfg);
  MfccMap m = random_mfcc(120, cfg.input_dim, 4);
  EmbeddingVector a = speaker_embed(m, w, cfg);
  EmbeddingVector b = speaker_embed(m, w, cfg);
  CHECK(a.values == b.values);
}

TEST_CASE("speaker embedding rejects mismatched input width") {
  SpeakerEncoderConfig cfg = desk_speaker();
  TensorArchive w = init_speaker_archive(2, cfg);
  CHECK_THROWS_AS(speaker_embed(random_mfcc(10, 40, 1), w, cfg), Error);
}

TEST_CASE("attentive pooling: single frame gives [h; 0] with unit weights") {
  const std::size_t c = 6;
  RandomSource rng(31);
  MatF h(c, 1);
  for (std::size_t i = 0; i < c; ++i) h(i, 0) = static_cast<float>(rng.normal());
  AttentionParams att;
  att.w1 = MatF(4, 3 * c);
  att.b1.assign(4, 0.0f);
  att.w2 = MatF(c, 4);
  att.b2.assign(c, 0.0f);
  for (std::size_t i = 0; i < att.w1.size(); ++i)
    att.w1.data()[i] = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i < att.w2.size(); ++i)
    att.w2.data()[i] = static_cast<float>(rng.normal());

  MatF weights;
  std::vector<float> out = attentive_stats_pool(h, att, &weights);
  REQUIRE(out.size() == 2 * c);
  for (std::size_t i = 0; i < c; ++i) {
    CHECK(weights(i, 0) == 1.0f);
    CHECK(out[i] == doctest::Approx(h(i, 0)));
    CHECK(out[c + i] == 0.0f);
  }
}

TEST_CASE("attentive pooling: zero attention weights mean uniform averaging") {
  const std::size_t c = 5, m = 13;
  RandomSource rng(32);
  MatF h(c, m);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = static_cast<float>(rng.normal());
  AttentionParams att;
  att.w1 = MatF(3, 3 * c);  // all zeros
  att.b1.assign(3, 0.0f);
  att.w2 = MatF(c, 3);
  att.b2.assign(c, 0.0f);

  std::vector<float> out = attentive_stats_pool(h, att);
  for (std::size_t i = 0; i < c; ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < m; ++t) mean += h(i, t);
    mean /= static_cast<double>(m);
    CHECK(out[i] == doctest::Approx(mean).epsilon(1e-6));
  }
}

TEST_CASE("attention weights sum to one per channel") {
  const std::size_t c = 7, m = 29;
  RandomSource rng(33);
  MatF h(c, m);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = static_cast<float>(rng.normal());
  AttentionParams att;
  att.w1 = MatF(8, 3 * c);
  att.b1.resize(8);
  att.w2 = MatF(c, 8);
  att.b2.resize(c);
  for (std::size_t i = 0; i < att.w1.size(); ++i)
    att.w1.data()[i] = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i < att.w2.size(); ++i)
    att.w2.data()[i] = static_cast<float>(rng.normal());
  for (auto& v : att.b1) v = static_cast<float>(rng.normal());
  for (auto& v : att.b2) v = static_cast<float>(rng.normal());

  MatF weights;
  attentive_stats_pool(h, att, &weights);
  for (std::size_t i = 0; i < c; ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      CHECK(weights(i, t) >= 0.0f);
      sum += weights(i, t);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("prosody embedding length is 128 for any valid input") {
  ProsodyEncoderConfig cfg = desk_prosody();
  TensorArchive w = init_prosody_archive(11, cfg);
  for (std::size_t frames : {64u, 640u}) {
    EmbeddingVector e = prosody_embed(random_mel(frames, cfg.mel_bands, frames), w, cfg);
    CHECK(e.kind == EmbeddingKind::prosody);
    CHECK(e.values.size() == 128);
    for (float v : e.values) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("prosody embedding pads short inputs instead of failing") {
  ProsodyEncoderConfig cfg = desk_prosody();
  TensorArchive w = init_prosody_archive(12, cfg);
  EmbeddingVector e = prosody_embed(random_mel(63, cfg.mel_bands, 1), w, cfg);
  CHECK(e.values.size() == 128);
  // padded 63-frame input equals the explicitly zero-padded 64-frame input
  MelSpectrogram padded = random_mel(63, cfg.mel_bands, 1);
  MelSpectrogram full;
  full.bands = cfg.mel_bands;
  full.values = MatD(64, static_cast<std::size_t>(cfg.mel_bands));
  for (std::size_t f = 0; f < 63; ++f)
    std::copy(padded.values.row(f), padded.values.row(f) + cfg.mel_bands, full.values.row(f));
  EmbeddingVector e2 = prosody_embed(full, w, cfg);
  CHECK(e.values == e2.values);
}

TEST_CASE("gru with all-zero weights stays at zero") {
  const std::size_t d = 5, hdim = 4, t = 7;
  GruWeights w{MatF(3 * hdim, d), MatF(3 * hdim, hdim), std::vector<float>(3 * hdim, 0.0f),
               std::vector<float>(3 * hdim, 0.0f)};
  MatF seq(t, d);
  RandomSource rng(8);
  for (std::size_t i = 0; i < seq.size(); ++i) seq.data()[i] = static_cast<float>(rng.normal());
  std::vector<float> h = gru_forward(seq, w);
  REQUIRE(h.size() == hdim);
  for (float v : h) CHECK(v == 0.0f);
}

TEST_CASE("gru single step matches hand-computed arithmetic") {
  // D = 1, H = 1; gates stacked [reset; update; candidate]
  GruWeights w;
  w.w_ih = MatF(3, 1, {0.5f, -0.25f, 1.0f});
  w.w_hh = MatF(3, 1, {0.3f, 0.2f, -0.4f});
  w.b_ih = {0.1f, 0.0f, 0.05f};
  w.b_hh = {0.0f, -0.1f, 0.2f};
  MatF seq(1, 1, {0.8f});

  const double r = 1.0 / (1.0 + std::exp(-(0.5 * 0.8 + 0.1)));
  const double z = 1.0 / (1.0 + std::exp(-(-0.25 * 0.8 - 0.1)));
  const double n = std::tanh(1.0 * 0.8 + 0.05 + r * 0.2);  // U_n*h = 0, b_hn = 0.2
  const double expected = (1.0 - z) * n;

  std::vector<float> h = gru_forward(seq, w);
  REQUIRE(h.size() == 1);
  CHECK(h[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("gru state stays inside (-1, 1)") {
  const std::size_t d = 6, hdim = 5;
  RandomSource rng(55);
  GruWeights w;
  w.w_ih = MatF(3 * hdim, d);
  w.w_hh = MatF(3 * hdim, hdim);
  for (std::size_t i = 0; i < w.w_ih.size(); ++i)
    w.w_ih.data()[i] = static_cast<float>(2.0 * rng.normal());
  for (std::size_t i = 0; i < w.w_hh.size(); ++i)
    w.w_hh.data()[i] = static_cast<float>(2.0 * rng.normal());
  w.b_ih.resize(3 * hdim);
  w.b_hh.resize(3 * hdim);
  for (auto& v : w.b_ih) v = static_cast<float>(rng.normal());
  for (auto& v : w.b_hh) v = static_cast<float>(rng.normal());

  MatF seq(200, d);
  for (std::size_t i = 0; i < seq.size(); ++i)
    seq.data()[i] = static_cast<float>(3.0 * rng.normal());
  std::vector<float> h = gru_forward(seq, w);
  for (float v : h) {
    CHECK(v > -1.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("distinct inputs give distinct embeddings") {
  SpeakerEncoderConfig scfg = desk_speaker();
  ProsodyEncoderConfig pcfg = desk_prosody();
  TensorArchive sw = init_speaker_archive(1001, scfg);
  TensorArchive pw = init_prosody_archive(1002, pcfg);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EmbeddingVector a = speaker_embed(random_mfcc(30, scfg.input_dim, 2 * seed), sw, scfg);
    EmbeddingVector b = speaker_embed(random_mfcc(30, scfg.input_dim, 2 * seed + 1), sw, scfg);
    CHECK(a.values != b.values);
  }
  EmbeddingVector pa = prosody_embed(random_mel(70, pcfg.mel_bands, 1), pw, pcfg);
  EmbeddingVector pb = prosody_embed(random_mel(70, pcfg.mel_bands, 2), pw, pcfg);
  CHECK(pa.values != pb.values);
}

TEST_CASE("embeddings stay finite for long inputs") {
  SpeakerEncoderConfig scfg = desk_speaker();
  TensorArchive sw = init_speaker_archive(2024, scfg);
  // ~10 s at the 10 ms hop
  EmbeddingVector e = speaker_embed(random_mfcc(1000, scfg.input_dim, 3), sw, scfg);
  for (float v : e.values) CHECK(std::isfinite(v));
}
