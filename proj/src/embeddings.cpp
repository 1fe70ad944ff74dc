#include "prosospeak/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "prosospeak/rng.hpp"

namespace prosospeak {
namespace {

constexpr float kBnEps = 1e-5f;

float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

/// y = W x + b for row-major W (rows x cols).
std::vector<float> affine(const MatF& w, const std::vector<float>& b,
                          const std::vector<float>& x) {
  std::vector<float> y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const float* wr = w.row(r);
    float acc = b.empty() ? 0.0f : b[r];
    for (std::size_t c = 0; c < w.cols(); ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// 1-D convolution over time with replicate edge padding. x is in_ch x M,
/// w is [out_ch][in_ch][k], output out_ch x M. Replicate padding keeps a
/// time-constant input exactly constant, which the pooling contract relies on.
MatF conv1d_replicate(const MatF& x, const float* w, const float* bias, int out_ch,
                      int in_ch, int k, int dilation) {
  const int m = static_cast<int>(x.cols());
  MatF y(static_cast<std::size_t>(out_ch), static_cast<std::size_t>(m));
  for (int co = 0; co < out_ch; ++co) {
    float* yr = y.row(static_cast<std::size_t>(co));
    const float b = bias ? bias[co] : 0.0f;
    for (int t = 0; t < m; ++t) yr[t] = b;
    for (int ci = 0; ci < in_ch; ++ci) {
      const float* xr = x.row(static_cast<std::size_t>(ci));
      const float* wk = w + (static_cast<std::size_t>(co) * in_ch + ci) * k;
      for (int j = 0; j < k; ++j) {
        const float wv = wk[j];
        if (wv == 0.0f) continue;
        const int off = (j - (k - 1) / 2) * dilation;
        int t = 0;
        for (; t < m && t + off < 0; ++t) yr[t] += wv * xr[0];
        const int hi = std::min(m, m - off);
        for (; t < hi; ++t) yr[t] += wv * xr[t + off];
        for (; t < m; ++t) yr[t] += wv * xr[m - 1];
      }
    }
  }
  return y;
}

/// Inference-mode batch norm over time, per channel.
void bn_inplace(MatF& x, const float* gamma, const float* beta, const float* mean,
                const float* var) {
  for (std::size_t c = 0; c < x.rows(); ++c) {
    const float scale = gamma[c] / std::sqrt(var[c] + kBnEps);
    const float shift = beta[c] - mean[c] * scale;
    float* r = x.row(c);
    for (std::size_t t = 0; t < x.cols(); ++t) r[t] = r[t] * scale + shift;
  }
}

void relu_inplace(MatF& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    x.data()[i] = std::max(0.0f, x.data()[i]);
}

struct BnRef {
  const float* gamma;
  const float* beta;
  const float* mean;
  const float* var;
};

BnRef bn_ref(const TensorArchive& w, const std::string& prefix) {
  return {w.data(prefix + ".gamma"), w.data(prefix + ".beta"), w.data(prefix + ".mean"),
          w.data(prefix + ".var")};
}

}  // namespace

std::string to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::speaker: return "speaker";
    case EmbeddingKind::prosody: return "prosody";
    case EmbeddingKind::combined: return "combined";
  }
  fail("invalid embedding kind");
}

void SpeakerEncoderConfig::validate() const {
  require(input_dim >= 1 && channels >= 1 && num_blocks >= 1 && scale >= 1 &&
              se_hidden >= 1 && agg_channels >= 1 && att_hidden >= 1 && out_dim >= 1,
          "speaker encoder config: all dimensions must be positive");
  require(static_cast<int>(dilations.size()) == num_blocks,
          "speaker encoder config: need one dilation per block");
  require(channels % scale == 0,
          "speaker encoder config: channels must be divisible by the Res2 scale");
}

nlohmann::json SpeakerEncoderConfig::to_json() const {
  return {{"input_dim", input_dim},   {"channels", channels},
          {"num_blocks", num_blocks}, {"dilations", dilations},
          {"scale", scale},           {"se_hidden", se_hidden},
          {"agg_channels", agg_channels}, {"att_hidden", att_hidden},
          {"out_dim", out_dim}};
}

SpeakerEncoderConfig SpeakerEncoderConfig::from_json(const nlohmann::json& j) {
  SpeakerEncoderConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.channels = j.at("channels").get<int>();
  c.num_blocks = j.at("num_blocks").get<int>();
  c.dilations = j.at("dilations").get<std::vector<int>>();
  c.scale = j.at("scale").get<int>();
  c.se_hidden = j.at("se_hidden").get<int>();
  c.agg_channels = j.at("agg_channels").get<int>();
  c.att_hidden = j.at("att_hidden").get<int>();
  c.out_dim = j.at("out_dim").get<int>();
  c.validate();
  return c;
}

void ProsodyEncoderConfig::validate() const {
  require(conv_channels.size() == 6, "prosody encoder config: exactly six conv layers");
  for (int c : conv_channels)
    require(c >= 1, "prosody encoder config: conv channels must be positive");
  require(mel_bands >= 1 && gru_hidden >= 1 && out_dim >= 1,
          "prosody encoder config: all dimensions must be positive");
  require(min_frames == 64, "prosody encoder config: six stride-2 layers fix min_frames at 64");
}

nlohmann::json ProsodyEncoderConfig::to_json() const {
  return {{"mel_bands", mel_bands},
          {"conv_channels", conv_channels},
          {"gru_hidden", gru_hidden},
          {"out_dim", out_dim},
          {"min_frames", min_frames}};
}

ProsodyEncoderConfig ProsodyEncoderConfig::from_json(const nlohmann::json& j) {
  ProsodyEncoderConfig c;
  c.mel_bands = j.at("mel_bands").get<int>();
  c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  c.gru_hidden = j.at("gru_hidden").get<int>();
  c.out_dim = j.at("out_dim").get<int>();
  c.min_frames = j.at("min_frames").get<int>();
  c.validate();
  return c;
}

namespace {

/// Expected tensor table of the speaker architecture.
void for_each_speaker_tensor(
    const SpeakerEncoderConfig& cfg,
    const std::function<void(const std::string&, std::vector<std::int64_t>)>& fn) {
  const std::int64_t b = cfg.input_dim, c = cfg.channels, s = cfg.scale;
  const std::int64_t g = c / s, se = cfg.se_hidden, agg = cfg.agg_channels;
  const std::int64_t att = cfg.att_hidden, out = cfg.out_dim;
  auto bn = [&](const std::string& prefix, std::int64_t ch) {
    fn(prefix + ".gamma", {ch});
    fn(prefix + ".beta", {ch});
    fn(prefix + ".mean", {ch});
    fn(prefix + ".var", {ch});
  };
  fn("stem.conv.weight", {c, b, 5});
  fn("stem.conv.bias", {c});
  bn("stem.bn", c);
  for (int i = 0; i < cfg.num_blocks; ++i) {
    std::string p = "block" + std::to_string(i);
    fn(p + ".conv_in.weight", {c, c, 1});
    fn(p + ".conv_in.bias", {c});
    bn(p + ".bn_in", c);
    for (int j = 1; j < cfg.scale; ++j) {
      std::string q = p + ".res2.conv" + std::to_string(j);
      fn(q + ".weight", {g, g, 3});
      fn(q + ".bias", {g});
    }
    bn(p + ".bn_mid", c);
    fn(p + ".conv_out.weight", {c, c, 1});
    fn(p + ".conv_out.bias", {c});
    bn(p + ".bn_out", c);
    fn(p + ".se.fc1.weight", {se, c});
    fn(p + ".se.fc1.bias", {se});
    fn(p + ".se.fc2.weight", {c, se});
    fn(p + ".se.fc2.bias", {c});
  }
  fn("agg.conv.weight", {agg, c * cfg.num_blocks, 1});
  fn("agg.conv.bias", {agg});
  fn("att.fc1.weight", {att, 3 * agg});
  fn("att.fc1.bias", {att});
  fn("att.fc2.weight", {agg, att});
  fn("att.fc2.bias", {agg});
  fn("proj.weight", {out, 2 * agg});
  fn("proj.bias", {out});
}

void for_each_prosody_tensor(
    const ProsodyEncoderConfig& cfg,
    const std::function<void(const std::string&, std::vector<std::int64_t>)>& fn) {
  std::int64_t in_ch = 1;
  std::int64_t freq = cfg.mel_bands;
  for (int i = 0; i < 6; ++i) {
    std::string p = "conv" + std::to_string(i);
    std::int64_t out_ch = cfg.conv_channels[static_cast<std::size_t>(i)];
    fn(p + ".weight", {out_ch, in_ch, 3, 3});
    fn(p + ".bias", {out_ch});
    fn(p + ".bn.gamma", {out_ch});
    fn(p + ".bn.beta", {out_ch});
    fn(p + ".bn.mean", {out_ch});
    fn(p + ".bn.var", {out_ch});
    in_ch = out_ch;
    freq = (freq - 1) / 2 + 1;
  }
  const std::int64_t d = in_ch * freq;
  const std::int64_t h = cfg.gru_hidden;
  fn("gru.w_ih", {3 * h, d});
  fn("gru.w_hh", {3 * h, h});
  fn("gru.b_ih", {3 * h});
  fn("gru.b_hh", {3 * h});
  fn("fc.weight", {cfg.out_dim, h});
  fn("fc.bias", {cfg.out_dim});
}

TensorArchive init_archive(
    std::uint64_t seed, const std::string& architecture, const nlohmann::json& cfg_json,
    const std::function<void(const std::function<void(const std::string&, std::vector<std::int64_t>)>&)>&
        for_each) {
  RandomSource rng(seed);
  TensorArchive a;
  a.metadata["architecture"] = architecture;
  a.metadata["config"] = cfg_json;
  a.metadata["seed"] = seed;
  for_each([&](const std::string& name, std::vector<std::int64_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    std::vector<float> values(n, 0.0f);
    const bool is_weight = name.ends_with(".weight") || name.ends_with("w_ih") ||
                           name.ends_with("w_hh");
    if (is_weight) {
      // fan_in = everything but the leading (output) dimension
      std::size_t fan_in = n / static_cast<std::size_t>(shape[0]);
      const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : values) v = static_cast<float>(rng.normal() * sd);
    } else if (name.ends_with(".gamma") || name.ends_with(".var")) {
      std::fill(values.begin(), values.end(), 1.0f);
    }
    // biases, bn beta and bn mean stay zero
    a.add(name, std::move(shape), std::move(values));
  });
  return a;
}

}  // namespace

void validate_speaker_archive(const TensorArchive& w, const SpeakerEncoderConfig& cfg) {
  cfg.validate();
  for_each_speaker_tensor(cfg, [&](const std::string& name, std::vector<std::int64_t> shape) {
    w.expect(name, shape);
  });
}

void validate_prosody_archive(const TensorArchive& w, const ProsodyEncoderConfig& cfg) {
  cfg.validate();
  for_each_prosody_tensor(cfg, [&](const std::string& name, std::vector<std::int64_t> shape) {
    w.expect(name, shape);
  });
}

TensorArchive init_speaker_archive(std::uint64_t seed, const SpeakerEncoderConfig& cfg) {
  cfg.validate();
  return init_archive(seed, kSpeakerArchitectureId, cfg.to_json(),
                      [&](auto fn) { for_each_speaker_tensor(cfg, fn); });
}

TensorArchive init_prosody_archive(std::uint64_t seed, const ProsodyEncoderConfig& cfg) {
  cfg.validate();
  return init_archive(seed, kProsodyArchitectureId, cfg.to_json(),
                      [&](auto fn) { for_each_prosody_tensor(cfg, fn); });
}

SpeakerEncoderConfig speaker_config_of(const TensorArchive& w) {
  require(w.metadata.value("architecture", "") == kSpeakerArchitectureId,
          "archive does not declare the speaker encoder architecture");
  return SpeakerEncoderConfig::from_json(w.metadata.at("config"));
}

ProsodyEncoderConfig prosody_config_of(const TensorArchive& w) {
  require(w.metadata.value("architecture", "") == kProsodyArchitectureId,
          "archive does not declare the prosody encoder architecture");
  return ProsodyEncoderConfig::from_json(w.metadata.at("config"));
}

TensorArchive load_weights(const std::filesystem::path& path) {
  TensorArchive a = load_archive(path);
  const std::string arch = a.metadata.value("architecture", "");
  if (arch == kSpeakerArchitectureId)
    validate_speaker_archive(a, SpeakerEncoderConfig::from_json(a.metadata.at("config")));
  else if (arch == kProsodyArchitectureId)
    validate_prosody_archive(a, ProsodyEncoderConfig::from_json(a.metadata.at("config")));
  else
    fail("archive declares unknown architecture '" + arch + "'");
  return a;
}

void save_weights(const std::filesystem::path& path, const TensorArchive& archive) {
  save_archive(path, archive);
}

std::vector<float> attentive_stats_pool(const MatF& h, const AttentionParams& att,
                                        MatF* weights_out) {
  const std::size_t c = h.rows();
  const std::size_t m = h.cols();
  require(m >= 1, "attentive_stats_pool: need at least one frame");
  require(att.w1.cols() == 3 * c, "attentive_stats_pool: w1 expects 3C columns");
  require(att.w2.rows() == c, "attentive_stats_pool: w2 must produce C scores");
  require(att.w2.cols() == att.w1.rows() && att.b1.size() == att.w1.rows() &&
              att.b2.size() == c,
          "attentive_stats_pool: attention parameter shapes disagree");

  // Global context: per-channel mean and std over time.
  std::vector<float> gmean(c), gstd(c);
  for (std::size_t i = 0; i < c; ++i) {
    const float* r = h.row(i);
    double s = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      s += r[t];
      s2 += static_cast<double>(r[t]) * r[t];
    }
    const double mu = s / static_cast<double>(m);
    gmean[i] = static_cast<float>(mu);
    gstd[i] = static_cast<float>(std::sqrt(std::max(0.0, s2 / static_cast<double>(m) - mu * mu)));
  }

  // Scores per frame: w2 * tanh(w1 * [h_t; gmean; gstd] + b1) + b2.
  MatF scores(c, m);
  std::vector<float> frame(3 * c);
  std::copy(gmean.begin(), gmean.end(), frame.begin() + static_cast<std::ptrdiff_t>(c));
  std::copy(gstd.begin(), gstd.end(), frame.begin() + static_cast<std::ptrdiff_t>(2 * c));
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t i = 0; i < c; ++i) frame[i] = h(i, t);
    std::vector<float> hid = affine(att.w1, att.b1, frame);
    for (auto& v : hid) v = std::tanh(v);
    std::vector<float> e = affine(att.w2, att.b2, hid);
    for (std::size_t i = 0; i < c; ++i) scores(i, t) = e[i];
  }

  // Per-channel softmax over time, then weighted mean / std.
  if (weights_out != nullptr) *weights_out = MatF(c, m);
  std::vector<float> out(2 * c);
  for (std::size_t i = 0; i < c; ++i) {
    const float* sr = scores.row(i);
    const float* hr = h.row(i);
    float mx = sr[0];
    for (std::size_t t = 1; t < m; ++t) mx = std::max(mx, sr[t]);
    double z = 0.0;
    for (std::size_t t = 0; t < m; ++t) z += std::exp(static_cast<double>(sr[t] - mx));
    double mu = 0.0, m2 = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      const double a = std::exp(static_cast<double>(sr[t] - mx)) / z;
      if (weights_out != nullptr) (*weights_out)(i, t) = static_cast<float>(a);
      mu += a * hr[t];
      m2 += a * static_cast<double>(hr[t]) * hr[t];
    }
    out[i] = static_cast<float>(mu);
    out[c + i] = static_cast<float>(std::sqrt(std::max(0.0, m2 - mu * mu)));
  }
  return out;
}

EmbeddingVector speaker_embed(const MfccMap& m, const TensorArchive& w,
                              const SpeakerEncoderConfig& cfg) {
  validate_speaker_archive(w, cfg);
  require(m.values.rows() >= 1, "speaker_embed: input has no frames");
  require(static_cast<int>(m.values.cols()) == cfg.input_dim,
          "speaker_embed: input has " + std::to_string(m.values.cols()) +
              " coefficients, config expects " + std::to_string(cfg.input_dim));

  const int c = cfg.channels;
  const int frames = static_cast<int>(m.values.rows());

  // Features as channels x time.
  MatF x(static_cast<std::size_t>(cfg.input_dim), static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t)
    for (int i = 0; i < cfg.input_dim; ++i)
      x(static_cast<std::size_t>(i), static_cast<std::size_t>(t)) =
          static_cast<float>(m.values(static_cast<std::size_t>(t), static_cast<std::size_t>(i)));

  MatF h = conv1d_replicate(x, w.data("stem.conv.weight"), w.data("stem.conv.bias"), c,
                            cfg.input_dim, 5, 1);
  relu_inplace(h);
  {
    BnRef bn = bn_ref(w, "stem.bn");
    bn_inplace(h, bn.gamma, bn.beta, bn.mean, bn.var);
  }

  const int g = c / cfg.scale;
  std::vector<MatF> block_outputs;
  for (int bi = 0; bi < cfg.num_blocks; ++bi) {
    const std::string p = "block" + std::to_string(bi);
    MatF a = conv1d_replicate(h, w.data(p + ".conv_in.weight"), w.data(p + ".conv_in.bias"),
                              c, c, 1, 1);
    relu_inplace(a);
    {
      BnRef bn = bn_ref(w, p + ".bn_in");
      bn_inplace(a, bn.gamma, bn.beta, bn.mean, bn.var);
    }

    // Res2: split channels into `scale` groups; group 0 passes through, each
    // later group convolves the sum of its input and the previous output.
    MatF res2(static_cast<std::size_t>(c), static_cast<std::size_t>(frames));
    MatF prev(static_cast<std::size_t>(g), static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t)
      for (int i = 0; i < g; ++i) prev(i, t) = a(i, t);
    for (int i = 0; i < g; ++i)
      std::copy(prev.row(i), prev.row(i) + frames, res2.row(i));
    for (int j = 1; j < cfg.scale; ++j) {
      MatF in(static_cast<std::size_t>(g), static_cast<std::size_t>(frames));
      for (int i = 0; i < g; ++i) {
        const float* ar = a.row(static_cast<std::size_t>(j * g + i));
        const float* pr = prev.row(static_cast<std::size_t>(i));
        float* ir = in.row(static_cast<std::size_t>(i));
        for (int t = 0; t < frames; ++t) ir[t] = ar[t] + pr[t];
      }
      const std::string q = p + ".res2.conv" + std::to_string(j);
      MatF y = conv1d_replicate(in, w.data(q + ".weight"), w.data(q + ".bias"), g, g, 3,
                                cfg.dilations[static_cast<std::size_t>(bi)]);
      relu_inplace(y);
      for (int i = 0; i < g; ++i)
        std::copy(y.row(i), y.row(i) + frames, res2.row(static_cast<std::size_t>(j * g + i)));
      prev = std::move(y);
    }
    {
      BnRef bn = bn_ref(w, p + ".bn_mid");
      bn_inplace(res2, bn.gamma, bn.beta, bn.mean, bn.var);
    }

    MatF o = conv1d_replicate(res2, w.data(p + ".conv_out.weight"),
                              w.data(p + ".conv_out.bias"), c, c, 1, 1);
    relu_inplace(o);
    {
      BnRef bn = bn_ref(w, p + ".bn_out");
      bn_inplace(o, bn.gamma, bn.beta, bn.mean, bn.var);
    }

    // Squeeze-excitation: gate channels by a bottleneck of the time average.
    std::vector<float> z(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) {
      const float* r = o.row(static_cast<std::size_t>(i));
      double s = 0.0;
      for (int t = 0; t < frames; ++t) s += r[t];
      z[static_cast<std::size_t>(i)] = static_cast<float>(s / frames);
    }
    std::vector<float> mid =
        affine(MatF(static_cast<std::size_t>(cfg.se_hidden), static_cast<std::size_t>(c),
                    w.tensor(p + ".se.fc1.weight")),
               w.tensor(p + ".se.fc1.bias"), z);
    for (auto& v : mid) v = std::max(0.0f, v);
    std::vector<float> gate =
        affine(MatF(static_cast<std::size_t>(c), static_cast<std::size_t>(cfg.se_hidden),
                    w.tensor(p + ".se.fc2.weight")),
               w.tensor(p + ".se.fc2.bias"), mid);
    for (auto& v : gate) v = sigmoidf(v);

    MatF blk(static_cast<std::size_t>(c), static_cast<std::size_t>(frames));
    for (int i = 0; i < c; ++i) {
      const float* hr = h.row(static_cast<std::size_t>(i));
      const float* orow = o.row(static_cast<std::size_t>(i));
      float* br = blk.row(static_cast<std::size_t>(i));
      const float gv = gate[static_cast<std::size_t>(i)];
      for (int t = 0; t < frames; ++t) br[t] = hr[t] + gv * orow[t];
    }
    block_outputs.push_back(std::move(blk));
    h = block_outputs.back();  // next block consumes this block's output
  }

  // Aggregate all block outputs through a 1x1 conv.
  MatF cat(static_cast<std::size_t>(c * cfg.num_blocks), static_cast<std::size_t>(frames));
  for (int bi = 0; bi < cfg.num_blocks; ++bi)
    for (int i = 0; i < c; ++i)
      std::copy(block_outputs[static_cast<std::size_t>(bi)].row(static_cast<std::size_t>(i)),
                block_outputs[static_cast<std::size_t>(bi)].row(static_cast<std::size_t>(i)) + frames,
                cat.row(static_cast<std::size_t>(bi * c + i)));
  MatF agg = conv1d_replicate(cat, w.data("agg.conv.weight"), w.data("agg.conv.bias"),
                              cfg.agg_channels, c * cfg.num_blocks, 1, 1);
  relu_inplace(agg);

  AttentionParams att{w.matrix("att.fc1.weight"), w.tensor("att.fc1.bias"),
                      w.matrix("att.fc2.weight"), w.tensor("att.fc2.bias")};
  std::vector<float> pooled = attentive_stats_pool(agg, att);

  std::vector<float> emb = affine(w.matrix("proj.weight"), w.tensor("proj.bias"), pooled);
  return {std::move(emb), EmbeddingKind::speaker};
}

namespace {

/// 3x3 stride-2 convolution with zero padding 1 on both axes.
/// x: [C_in][T][F] flattened; returns [C_out][T'][F'] with T' = ceil(T/2).
std::vector<float> conv2d_s2(const std::vector<float>& x, int cin, int t_in, int f_in,
                             const float* w, const float* b, int cout, int& t_out,
                             int& f_out) {
  t_out = (t_in - 1) / 2 + 1;
  f_out = (f_in - 1) / 2 + 1;
  std::vector<float> y(static_cast<std::size_t>(cout) * t_out * f_out);
  for (int co = 0; co < cout; ++co) {
    for (int to = 0; to < t_out; ++to) {
      for (int fo = 0; fo < f_out; ++fo) {
        float acc = b[co];
        for (int ci = 0; ci < cin; ++ci) {
          const float* wk = w + ((static_cast<std::size_t>(co) * cin + ci) * 9);
          const float* xc = x.data() + static_cast<std::size_t>(ci) * t_in * f_in;
          for (int kt = 0; kt < 3; ++kt) {
            const int ti = 2 * to + kt - 1;
            if (ti < 0 || ti >= t_in) continue;
            for (int kf = 0; kf < 3; ++kf) {
              const int fi = 2 * fo + kf - 1;
              if (fi < 0 || fi >= f_in) continue;
              acc += wk[kt * 3 + kf] * xc[ti * f_in + fi];
            }
          }
        }
        y[(static_cast<std::size_t>(co) * t_out + to) * f_out + fo] = acc;
      }
    }
  }
  return y;
}

}  // namespace

std::vector<float> gru_forward(const MatF& seq, const GruWeights& w) {
  const std::size_t t_len = seq.rows();
  const std::size_t d = seq.cols();
  require(t_len >= 1, "gru_forward: empty sequence");
  const std::size_t h3 = w.w_ih.rows();
  require(h3 % 3 == 0, "gru_forward: gate dimension must be divisible by 3");
  const std::size_t h = h3 / 3;
  require(w.w_ih.cols() == d, "gru_forward: input width mismatch");
  require(w.w_hh.rows() == h3 && w.w_hh.cols() == h, "gru_forward: hidden weight mismatch");
  require(w.b_ih.size() == h3 && w.b_hh.size() == h3, "gru_forward: bias length mismatch");

  std::vector<float> state(h, 0.0f);
  std::vector<float> xt(d);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::copy(seq.row(t), seq.row(t) + d, xt.begin());
    std::vector<float> gi = affine(w.w_ih, w.b_ih, xt);     // 3H
    std::vector<float> gh = affine(w.w_hh, w.b_hh, state);  // 3H
    for (std::size_t i = 0; i < h; ++i) {
      const float r = sigmoidf(gi[i] + gh[i]);
      const float z = sigmoidf(gi[h + i] + gh[h + i]);
      const float n = std::tanh(gi[2 * h + i] + r * gh[2 * h + i]);
      state[i] = (1.0f - z) * n + z * state[i];
    }
  }
  return state;
}

EmbeddingVector prosody_embed(const MelSpectrogram& m, const TensorArchive& w,
                              const ProsodyEncoderConfig& cfg) {
  validate_prosody_archive(w, cfg);
  require(static_cast<int>(m.values.cols()) == cfg.mel_bands,
          "prosody_embed: input has " + std::to_string(m.values.cols()) +
              " bands, config expects " + std::to_string(cfg.mel_bands));
  require(m.values.rows() >= 1, "prosody_embed: input has no frames");

  // Zero-pad short inputs at the tail so six stride-2 layers are valid.
  const int t0 = std::max<int>(static_cast<int>(m.values.rows()), cfg.min_frames);
  const int f0 = cfg.mel_bands;
  std::vector<float> x(static_cast<std::size_t>(t0) * f0, 0.0f);
  for (std::size_t t = 0; t < m.values.rows(); ++t)
    for (int f = 0; f < f0; ++f)
      x[t * static_cast<std::size_t>(f0) + static_cast<std::size_t>(f)] =
          static_cast<float>(m.values(t, static_cast<std::size_t>(f)));

  int cin = 1, t_in = t0, f_in = f0;
  for (int layer = 0; layer < 6; ++layer) {
    const std::string p = "conv" + std::to_string(layer);
    const int cout = cfg.conv_channels[static_cast<std::size_t>(layer)];
    int t_out = 0, f_out = 0;
    std::vector<float> y = conv2d_s2(x, cin, t_in, f_in, w.data(p + ".weight"),
                                     w.data(p + ".bias"), cout, t_out, f_out);
    // batch norm (inference) + relu per channel
    const float* gamma = w.data(p + ".bn.gamma");
    const float* beta = w.data(p + ".bn.beta");
    const float* mean = w.data(p + ".bn.mean");
    const float* var = w.data(p + ".bn.var");
    for (int co = 0; co < cout; ++co) {
      const float scale = gamma[co] / std::sqrt(var[co] + kBnEps);
      const float shift = beta[co] - mean[co] * scale;
      float* yc = y.data() + static_cast<std::size_t>(co) * t_out * f_out;
      for (int i = 0; i < t_out * f_out; ++i)
        yc[i] = std::max(0.0f, yc[i] * scale + shift);
    }
    x = std::move(y);
    cin = cout;
    t_in = t_out;
    f_in = f_out;
  }

  // Flatten channels x freq per remaining time step: seq is T x (C*F).
  const std::size_t d = static_cast<std::size_t>(cin) * f_in;
  MatF seq(static_cast<std::size_t>(t_in), d);
  for (int t = 0; t < t_in; ++t)
    for (int ci = 0; ci < cin; ++ci)
      for (int f = 0; f < f_in; ++f)
        seq(static_cast<std::size_t>(t), static_cast<std::size_t>(ci) * f_in + f) =
            x[(static_cast<std::size_t>(ci) * t_in + t) * f_in + f];

  GruWeights gw{w.matrix("gru.w_ih"), w.matrix("gru.w_hh"), w.tensor("gru.b_ih"),
                w.tensor("gru.b_hh")};
  std::vector<float> hidden = gru_forward(seq, gw);

  std::vector<float> emb = affine(w.matrix("fc.weight"), w.tensor("fc.bias"), hidden);
  for (auto& v : emb) v = std::tanh(v);
  return {std::move(emb), EmbeddingKind::prosody};
}

}  // namespace prosospeak
