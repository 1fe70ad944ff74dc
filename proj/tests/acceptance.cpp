// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "prosospeak/pipeline.hpp"
#include "prosospeak/rng.hpp"

using namespace prosospeak;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const char* what, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", id, what, detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

AudioBuffer random_speech_like(double seconds, std::uint64_t seed) {
  RandomSource rng(seed);
  AudioBuffer a;
  a.sample_rate = 16000;
  a.samples.resize(static_cast<std::size_t>(seconds * 16000));
  double lp = 0.0;
  for (auto& s : a.samples) {
    lp = 0.95 * lp + 0.3 * (2.0 * rng.uniform() - 1.0);
    s = lp;
  }
  return a;
}

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

// --------------------------------------------------------------------------
// 1. SMO dual objective vs projected-gradient QP reference
// --------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_rel = 0.0, worst_sum = 0.0;
  int problems = 0;
  bool ok = true;

  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RandomSource rng(seed);
    const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform_int(0, 16));    // <= 20
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));   // <= 5
    MatD x(n, dim);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
      y[i] = i == 0 ? Label::REAL : (i == 1 ? Label::DF : (rng.uniform() < 0.5 ? Label::REAL : Label::DF));
    }
    const double c = std::vector<double>{0.1, 1.0, 10.0, 100.0}[seed % 4];

    for (KernelKind kk : {KernelKind::rbf, KernelKind::polynomial, KernelKind::sigmoid}) {
      KernelSpec k;
      k.kind = kk;
      k.gamma = 1.0 / static_cast<double>(dim);
      // run past the 1e-3 operating tolerance so the objective itself is
      // comparable at 1e-6 relative
      SvmModel m = svm_train(x, y, c, k, SmoOptions{1e-8, 0});

      std::vector<double> alpha(n, 0.0);
      std::size_t sv = 0;
      for (std::size_t i = 0; i < n && sv < m.support_vectors.rows(); ++i) {
        bool same = true;
        for (std::size_t j = 0; j < dim; ++j)
          if (x(i, j) != m.support_vectors(sv, j)) same = false;
        if (same) alpha[i] = std::abs(m.dual_coefs[sv++]);
      }
      double asum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        asum += alpha[i] * (y[i] == Label::DF ? 1.0 : -1.0);
      worst_sum = std::max(worst_sum, std::abs(asum));

      // dense Q with independently-written kernel formulas
      std::vector<double> q(n * n), ys(n);
      for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] == Label::DF ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0, d2 = 0.0;
          for (std::size_t t = 0; t < dim; ++t) {
            dot += x(i, t) * x(j, t);
            const double d = x(i, t) - x(j, t);
            d2 += d * d;
          }
          double kv = 0.0;
          if (kk == KernelKind::rbf) kv = std::exp(-k.gamma * d2);
          if (kk == KernelKind::polynomial) kv = std::pow(k.gamma * dot, 3);
          if (kk == KernelKind::sigmoid) kv = std::tanh(k.gamma * dot);
          q[i * n + j] = ys[i] * ys[j] * kv;
        }
      }
      oracle::QpSolution ref = oracle::solve_svm_dual(q, ys, c);
      const double got = svm_dual_objective(x, y, alpha, k);
      const double rel = std::abs(got - ref.objective) / std::max(1.0, std::abs(ref.objective));
      worst_rel = std::max(worst_rel, rel);
      ++problems;
    }
  }
  const double elapsed = seconds_since(t0);
  ok = worst_rel <= 1e-6 && worst_sum <= 1e-6 && elapsed < 30.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d problems, worst objective rel err %.2e, worst |sum a*y| %.2e, %.1f s",
                problems, worst_rel, worst_sum, elapsed);
  report(1, "SMO matches the projected-gradient QP oracle", ok, detail);
}

// --------------------------------------------------------------------------
// 2. AUC = Mann-Whitney within 1e-12; EER = sweep within 1e-9
// --------------------------------------------------------------------------
void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_auc = 0.0, worst_eer = 0.0;
  int sets = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    RandomSource rng(seed);
    const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform_int(0, 196));
    std::vector<double> s(n);
    std::vector<bool> df(n);
    std::vector<Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 16.0) / 16.0;  // induce ties
      df[i] = i < 2 ? (i == 0) : rng.uniform() < 0.5;
      y[i] = df[i] ? Label::DF : Label::REAL;
    }
    RocCurve curve = roc_curve(s, y);
    worst_auc = std::max(worst_auc, std::abs(auc(curve) - oracle::mann_whitney_auc(s, df)));
    worst_eer = std::max(worst_eer, std::abs(eer(curve) - oracle::sweep_eer(s, df)));
    ++sets;
  }
  const double elapsed = seconds_since(t0);
  const bool ok = worst_auc <= 1e-12 && worst_eer <= 1e-9 && elapsed < 10.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d score sets, worst AUC err %.2e, worst EER err %.2e, %.1f s", sets,
                worst_auc, worst_eer, elapsed);
  report(2, "metric oracles (Mann-Whitney AUC, threshold-sweep EER)", ok, detail);
}

// --------------------------------------------------------------------------
// 3. DSP oracles
// --------------------------------------------------------------------------
void criterion_3() {
  bool ok = true;
  std::string detail;

  {  // mfcc = dct(log-mel) composition
    AudioBuffer a = random_speech_like(0.5, 99);
    MfccMap m = mfcc(a, 25.0, 10.0, 80);
    MelSpectrogram mel = mel_spectrogram(a, 25.0, 10.0, 80);
    double worst = 0.0;
    for (std::size_t f = 0; f < mel.values.rows(); ++f) {
      std::vector<double> row(mel.values.row(f), mel.values.row(f) + 80);
      std::vector<double> c = dct_ii(row, 80);
      for (std::size_t b = 0; b < 80; ++b)
        worst = std::max(worst, std::abs(c[b] - m.values(f, b)));
    }
    ok = ok && worst < 1e-9;
    detail += "composition err " + std::to_string(worst);
  }
  {  // 1 kHz peak bins
    AudioBuffer tone;
    tone.sample_rate = 16000;
    tone.samples.resize(16000);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
      tone.samples[i] = std::sin(2.0 * 3.14159265358979323846 * 1000.0 * i / 16000.0);

    Spectrogram s = stft(tone, 25.0, 10.0, 512);
    bool stft_ok = true;
    for (std::size_t f = 0; f < s.magnitudes.rows(); ++f) {
      std::size_t arg = 0;
      for (std::size_t b = 1; b < s.magnitudes.cols(); ++b)
        if (s.magnitudes(f, b) > s.magnitudes(f, arg)) arg = b;
      stft_ok = stft_ok && arg == 32;
    }
    MelSpectrogram mel = mel_spectrogram(tone);
    const double lo = mel_from_hz(0.0), hi = mel_from_hz(8000.0);
    std::size_t nearest = 0;
    double best = 1e12;
    for (int k = 1; k <= 80; ++k) {
      const double center = hz_from_mel(lo + (hi - lo) * k / 81.0);
      if (std::abs(center - 1000.0) < best) {
        best = std::abs(center - 1000.0);
        nearest = static_cast<std::size_t>(k - 1);
      }
    }
    bool mel_ok = true;
    for (std::size_t f = 0; f < mel.values.rows(); ++f) {
      std::size_t arg = 0;
      for (std::size_t b = 1; b < 80; ++b)
        if (mel.values(f, b) > mel.values(f, arg)) arg = b;
      mel_ok = mel_ok && arg == nearest;
    }
    ok = ok && stft_ok && mel_ok;
    detail += std::string(", stft peak bin ") + (stft_ok ? "exact" : "WRONG") +
              ", mel peak band " + (mel_ok ? "exact" : "WRONG");
  }
  {  // dct vs naive formula
    RandomSource rng(4);
    double worst = 0.0;
    for (int k = 2; k <= 64; ++k) {
      std::vector<double> v(static_cast<std::size_t>(k));
      for (auto& x : v) x = rng.normal();
      std::vector<double> got = dct_ii(v, k);
      std::vector<double> ref = oracle::naive_dct_ii(v, k);
      for (int i = 0; i < k; ++i)
        worst = std::max(worst, std::abs(got[static_cast<std::size_t>(i)] -
                                         ref[static_cast<std::size_t>(i)]));
    }
    ok = ok && worst < 1e-12;
    detail += ", dct err " + std::to_string(worst);
  }
  report(3, "DSP oracles (mfcc composition, peak bins, naive DCT)", ok, detail);
}

// --------------------------------------------------------------------------
// 4. Embedding invariants across durations and archives
// --------------------------------------------------------------------------
void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string bad;

  SpeakerEncoderConfig scfg = desk_speaker();
  ProsodyEncoderConfig pcfg = desk_prosody();
  RandomSource hseed(4242);

  for (std::uint64_t seed = 0; seed < 10 && ok; ++seed) {
    TensorArchive sw = init_speaker_archive(seed, scfg);
    TensorArchive pw = init_prosody_archive(seed + 1000, pcfg);
    for (double duration : {0.8, 2.0, 10.0, 60.0}) {
      AudioBuffer a = random_speech_like(duration, seed * 16 + static_cast<std::uint64_t>(duration));
      EmbeddingVector f_s = speaker_embed(mfcc(a), sw, scfg);
      EmbeddingVector f_p = prosody_embed(mel_spectrogram(a), pw, pcfg);
      FeatureVector f = concat(f_s, f_p);
      if (f_s.values.size() != 192 || f_p.values.size() != 128 || f.values.size() != 320) {
        ok = false;
        bad = "wrong embedding length";
        break;
      }
      for (float v : f_s.values)
        if (!std::isfinite(v)) { ok = false; bad = "NaN/Inf in f_s"; }
      for (float v : f_p.values)
        if (!std::isfinite(v)) { ok = false; bad = "NaN/Inf in f_p"; }

      // attention normalization for this archive at this sequence length
      const std::size_t frames = mfcc(a).values.rows();
      MatF h(static_cast<std::size_t>(scfg.agg_channels), frames);
      for (std::size_t i = 0; i < h.size(); ++i)
        h.data()[i] = static_cast<float>(hseed.normal());
      AttentionParams att{sw.matrix("att.fc1.weight"), sw.tensor("att.fc1.bias"),
                          sw.matrix("att.fc2.weight"), sw.tensor("att.fc2.bias")};
      MatF weights;
      attentive_stats_pool(h, att, &weights);
      for (std::size_t c = 0; c < weights.rows(); ++c) {
        double sum = 0.0;
        for (std::size_t t = 0; t < weights.cols(); ++t) sum += weights(c, t);
        if (std::abs(sum - 1.0) > 1e-6) { ok = false; bad = "attention weights not normalized"; }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "10 archives x {0.8,2,10,60} s%s%s, %.1f s",
                bad.empty() ? "" : ", ", bad.c_str(), elapsed);
  report(4, "embedding length/finiteness/attention invariants", ok, detail);
}

// --------------------------------------------------------------------------
// 5 + 6 + 8. Synthetic end-to-end experiment, robustness sweep, determinism
// --------------------------------------------------------------------------
struct ExperimentOutcome {
  double combined_all_auc = 0.0;
  double prosody_tts_auc = 0.0;
  double prosody_vc_auc = 0.0;
  double speaker_tts_auc = 0.0;
  double speaker_vc_auc = 0.0;
  std::vector<double> degraded_auc;  // none, br128, br64, br32
  std::vector<std::string> metrics_bytes;  // every metrics.json, fixed order
};

ExperimentOutcome run_experiment(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  make_synthetic_corpus(7, 40, root / "corpus");
  const fs::path manifest = root / "corpus" / "manifest.csv";

  save_weights(root / "speaker.psw", init_speaker_archive(1234, desk_speaker()));
  save_weights(root / "prosody.psw", init_prosody_archive(5678, desk_prosody()));

  ExtractOptions ex;
  ex.manifest = manifest;
  ex.speaker_weights = root / "speaker.psw";
  ex.prosody_weights = root / "prosody.psw";
  ex.out_dir = root / "features";
  ExtractSummary s = cmd_extract(ex);
  require(s.failures.empty(), "extraction failed in the acceptance experiment");

  AblateOptions ab;
  ab.manifest = manifest;
  ab.features_dir = root / "features";
  ab.out_dir = root / "ablation";
  nlohmann::json table = cmd_ablate(ab);

  ExperimentOutcome out;
  for (const auto& row : table.at("results")) {
    const std::string model = row.at("model");
    const std::string scenario = row.at("scenario");
    const double a = row.at("auc").get<double>();
    if (model == "combined" && scenario == "ALL") out.combined_all_auc = a;
    if (model == "prosody" && scenario == "TTS") out.prosody_tts_auc = a;
    if (model == "prosody" && scenario == "VC") out.prosody_vc_auc = a;
    if (model == "speaker" && scenario == "TTS") out.speaker_tts_auc = a;
    if (model == "speaker" && scenario == "VC") out.speaker_vc_auc = a;
  }

  out.degraded_auc.push_back(out.combined_all_auc);  // profile none
  for (const char* profile : {"br128", "br64", "br32"}) {
    EvalOptions ev;
    ev.model = root / "ablation" / "combined.psk";
    ev.manifest = manifest;
    ev.features_dir = root / "features";
    ev.out_dir = root / "degraded" / profile;
    ev.scenario = "ALL";
    ev.profile = degradation_label_from_string(profile);
    ev.speaker_weights = root / "speaker.psw";
    ev.prosody_weights = root / "prosody.psw";
    EvalReport rep = cmd_eval(ev);
    out.degraded_auc.push_back(rep.auc_value);
  }

  for (const char* model : {"combined", "speaker", "prosody"})
    for (const char* scenario : {"ALL", "TTS", "VC"})
      out.metrics_bytes.push_back(slurp(root / "ablation" / model / scenario / "metrics.json"));
  for (const char* profile : {"br128", "br64", "br32"})
    out.metrics_bytes.push_back(slurp(root / "degraded" / profile / "metrics.json"));
  return out;
}

void criteria_5_6_8() {
  const fs::path base = fs::temp_directory_path() / "prosospeak_acceptance";
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentOutcome a = run_experiment(base / "run_a");
  const double run_seconds = seconds_since(t0);

  {  // criterion 5
    const bool ok = a.combined_all_auc >= 0.95 && a.prosody_tts_auc > a.prosody_vc_auc &&
                    a.speaker_vc_auc > a.speaker_tts_auc && run_seconds < 300.0;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "combined ALL AUC %.3f; prosody TTS %.3f vs VC %.3f; speaker VC %.3f vs "
                  "TTS %.3f; %.0f s",
                  a.combined_all_auc, a.prosody_tts_auc, a.prosody_vc_auc, a.speaker_vc_auc,
                  a.speaker_tts_auc, run_seconds);
    report(5, "synthetic end-to-end experiment reproduces the ablation pattern", ok, detail);
  }
  {  // criterion 6
    bool ok = a.degraded_auc.size() == 4;
    for (std::size_t i = 1; i < a.degraded_auc.size(); ++i)
      ok = ok && a.degraded_auc[i] <= a.degraded_auc[i - 1] + 0.02;
    ok = ok && a.degraded_auc.back() >= 0.85;
    char detail[200];
    std::snprintf(detail, sizeof(detail), "AUC none %.3f -> br128 %.3f -> br64 %.3f -> br32 %.3f",
                  a.degraded_auc[0], a.degraded_auc[1], a.degraded_auc[2], a.degraded_auc[3]);
    report(6, "compression robustness is monotone within tolerance", ok, detail);
  }
  {  // criterion 8
    ExperimentOutcome b = run_experiment(base / "run_b");
    bool ok = a.metrics_bytes.size() == b.metrics_bytes.size();
    for (std::size_t i = 0; ok && i < a.metrics_bytes.size(); ++i)
      ok = a.metrics_bytes[i] == b.metrics_bytes[i];
    char detail[120];
    std::snprintf(detail, sizeof(detail), "%zu metrics files compared byte-for-byte",
                  a.metrics_bytes.size());
    report(8, "same-seed reruns emit byte-identical metrics JSON", ok, detail);
  }
}

// --------------------------------------------------------------------------
// 7. Standardization exactness
// --------------------------------------------------------------------------
void criterion_7() {
  bool ok = true;
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomSource rng(seed);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 60));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform_int(0, 40));
    MatD rows(n, d);
    for (std::size_t i = 0; i < rows.size(); ++i)
      rows.data()[i] = 10.0 * rng.normal() + 5.0;
    for (std::size_t i = 0; i < n; ++i) rows(i, 0) = 3.25;  // one degenerate column

    Standardizer s = fit_standardizer(rows);
    MatD z = apply_standardizer(s, rows);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0, var = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += z(i, j);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dv = z(i, j) - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(n);
      worst_mean = std::max(worst_mean, std::abs(mean));
      if (s.stdev()[j] > 0.0) worst_var = std::max(worst_var, std::abs(var - 1.0));
    }
  }
  ok = worst_mean <= 1e-9 && worst_var <= 1e-9;
  char detail[120];
  std::snprintf(detail, sizeof(detail), "worst |mean| %.2e, worst |var-1| %.2e", worst_mean,
                worst_var);
  report(7, "z-score standardization is exact on its training matrix", ok, detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criteria_5_6_8();
  criterion_7();
  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
