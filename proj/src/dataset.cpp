#include "prosospeak/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "prosospeak/audio.hpp"
#include "prosospeak/rng.hpp"

namespace prosospeak {

std::string to_string(SynthesisKind k) {
  switch (k) {
    case SynthesisKind::none: return "none";
    case SynthesisKind::TTS: return "TTS";
    case SynthesisKind::VC: return "VC";
    case SynthesisKind::hybrid: return "hybrid";
  }
  fail("invalid synthesis kind");
}

SynthesisKind synthesis_kind_from_string(const std::string& s) {
  if (s == "none") return SynthesisKind::none;
  if (s == "TTS") return SynthesisKind::TTS;
  if (s == "VC") return SynthesisKind::VC;
  if (s == "hybrid") return SynthesisKind::hybrid;
  fail("unknown synthesis kind '" + s + "' (expected none|TTS|VC|hybrid)");
}

std::string to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::dev: return "dev";
    case Partition::test: return "test";
  }
  fail("invalid partition");
}

Partition partition_from_string(const std::string& s) {
  if (s == "train") return Partition::train;
  if (s == "dev") return Partition::dev;
  if (s == "test") return Partition::test;
  fail("unknown partition '" + s + "' (expected train|dev|test)");
}

std::vector<ManifestRecord> Corpus::partition(Partition p) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.partition == p) out.push_back(r);
  return out;
}

std::size_t Corpus::count(Label l) const {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.label == l) ++n;
  return n;
}

std::size_t Corpus::count(Partition p) const {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.partition == p) ++n;
  return n;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

constexpr const char* kManifestHeader = "path,label,system_id,synthesis_kind,partition";

}  // namespace

Corpus parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open manifest: " + path.string());

  std::string line;
  if (!std::getline(in, line)) fail("empty manifest file: " + path.string());
  {
    std::string header = line;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    require(header == kManifestHeader,
            "manifest header must be `" + std::string(kManifestHeader) + "`");
  }

  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");
  Corpus corpus;
  std::map<std::string, Partition> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line[0] == '#') continue;  // comment rows in templates
    std::vector<std::string> f = split_csv_line(line);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 5) fail("malformed manifest row at " + where + " (expected 5 fields)");

    ManifestRecord rec;
    require(!f[0].empty(), "empty path in manifest row at " + where);
    std::filesystem::path p(f[0]);
    rec.path = p.is_absolute() ? p.string() : (base / p).string();
    try {
      rec.label = label_from_string(f[1]);
      rec.system_id = f[2];
      rec.synthesis_kind = synthesis_kind_from_string(f[3]);
      rec.partition = partition_from_string(f[4]);
    } catch (const Error& e) {
      fail(std::string(e.what()) + " at " + where);
    }
    require(!rec.system_id.empty(), "empty system_id in manifest row at " + where);
    const bool is_real = rec.label == Label::REAL;
    const bool kind_none = rec.synthesis_kind == SynthesisKind::none;
    if (is_real != kind_none)
      fail("label/synthesis_kind mismatch at " + where +
           " (REAL rows must have kind none, DF rows must not)");

    auto it = seen.find(rec.path);
    if (it != seen.end() && it->second != rec.partition)
      fail("path '" + rec.path + "' appears in two partitions (row at " + where + ")");
    seen.emplace(rec.path, rec.partition);
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty()) fail("empty corpus in manifest " + path.string());
  return corpus;
}

void write_manifest(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) fail("cannot write manifest: " + path.string());
  out << kManifestHeader << "\n";
  for (const auto& r : corpus.records)
    out << r.path << "," << to_string(r.label) << "," << r.system_id << ","
        << to_string(r.synthesis_kind) << "," << to_string(r.partition) << "\n";
  if (!out) fail("short write to " + path.string());
}

Corpus filter_by_kind(const Corpus& corpus, const std::set<SynthesisKind>& kinds) {
  require(!corpus.records.empty(), "filter_by_kind: empty corpus");
  Corpus out;
  for (const auto& r : corpus.records)
    if (r.label == Label::REAL || kinds.count(r.synthesis_kind) > 0)
      out.records.push_back(r);
  if (out.count(Label::DF) == 0)
    fail("filter_by_kind: no DF record matches the requested synthesis kinds");
  return out;
}

namespace {

constexpr int kSynthRate = 16000;

struct UtteranceParams {
  double duration_s = 3.0;
  double f0 = 150.0;
  double tilt = 1.0;
  // vibrato / jitter (real and VC classes)
  double vib_rate = 5.0;
  double vib_depth = 0.02;
  double vib_phase = 0.0;
  double jit_phase1 = 0.0;
  double jit_phase2 = 0.0;
  // smooth amplitude contour
  double amp_rate = 0.6;
  double amp_phase = 0.0;
  // stepwise amplitude (TTS class)
  std::vector<double> step_levels;
  double step_len_s = 0.45;
};

/// Fixed voice-conversion spectral warp, +-10 dB ripple over frequency.
double vc_warp_db(double hz) { return 10.0 * std::sin(2.0 * 3.14159265358979323846 * hz / 2400.0 + 1.2); }

enum class SynthClass { real, fake_tts, fake_vc };

AudioBuffer synth_utterance(SynthClass cls, const UtteranceParams& p, RandomSource& rng) {
  constexpr double kPi = 3.14159265358979323846;
  const auto n = static_cast<std::size_t>(p.duration_s * kSynthRate);

  // Harmonic stack below 3.7 kHz with a per-utterance spectral tilt; the VC
  // class applies the fixed warp on top.
  const int harmonics = std::max(3, static_cast<int>(3700.0 / p.f0));
  std::vector<double> amp(static_cast<std::size_t>(harmonics));
  double amp_sum = 0.0;
  for (int k = 0; k < harmonics; ++k) {
    double a = std::pow(1.0 / (k + 1.0), p.tilt);
    if (cls == SynthClass::fake_vc)
      a *= std::pow(10.0, vc_warp_db((k + 1.0) * p.f0) / 20.0);
    amp[static_cast<std::size_t>(k)] = a;
    amp_sum += a;
  }
  for (double& a : amp) a *= 0.92 / amp_sum;

  const bool flat_pitch = cls == SynthClass::fake_tts;
  std::vector<double> phase(static_cast<std::size_t>(harmonics), 0.0);

  AudioBuffer out;
  out.sample_rate = kSynthRate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSynthRate;

    double f0 = p.f0;
    if (!flat_pitch) {
      const double vib = 1.0 + p.vib_depth * std::sin(2.0 * kPi * p.vib_rate * t + p.vib_phase);
      const double jit = 1.0 + 0.004 * std::sin(2.0 * kPi * 1.3 * t + p.jit_phase1) +
                         0.003 * std::sin(2.0 * kPi * 2.7 * t + p.jit_phase2);
      f0 *= vib * jit;
    }

    double level;
    if (cls == SynthClass::fake_tts) {
      const auto seg = static_cast<std::size_t>(t / p.step_len_s);
      const double u = t - static_cast<double>(seg) * p.step_len_s;
      const double cur = p.step_levels[seg % p.step_levels.size()];
      const double nxt = p.step_levels[(seg + 1) % p.step_levels.size()];
      // 5 ms ramp at segment boundaries to avoid clicks
      const double tail = p.step_len_s - 0.005;
      level = u < tail ? cur : cur + (nxt - cur) * (u - tail) / 0.005;
    } else {
      level = 0.55 + 0.35 * std::sin(2.0 * kPi * p.amp_rate * t + p.amp_phase);
      level = std::max(0.15, level);
    }
    // shared attack/release ramps
    const double edge = std::min({1.0, t / 0.1, (p.duration_s - t) / 0.1});
    level *= std::max(0.0, edge);

    double s = 0.0;
    for (int k = 0; k < harmonics; ++k) {
      s += amp[static_cast<std::size_t>(k)] * std::sin(phase[static_cast<std::size_t>(k)]);
      phase[static_cast<std::size_t>(k)] += 2.0 * kPi * (k + 1.0) * f0 / kSynthRate;
    }
    // low noise floor keeps the feature maps off the log floor
    s += 3e-4 * (rng.uniform() * 2.0 - 1.0);
    out.samples[i] = std::clamp(level * s, -1.0, 1.0);
  }
  return out;
}

}  // namespace

Corpus make_synthetic_corpus(std::uint64_t seed, int n_per_class,
                             const std::filesystem::path& out_dir) {
  require(n_per_class >= 2, "make_synthetic_corpus: need at least 2 utterances per class");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail("cannot create output directory " + out_dir.string() + ": " + ec.message());

  RandomSource rng(seed);
  Corpus corpus;

  struct ClassSpec {
    SynthClass cls;
    const char* stem;
    Label label;
    SynthesisKind kind;
    const char* system_id;
  };
  const ClassSpec classes[] = {
      {SynthClass::real, "real", Label::REAL, SynthesisKind::none, "AU"},
      {SynthClass::fake_tts, "tts", Label::DF, SynthesisKind::TTS, "TTS-A"},
      {SynthClass::fake_vc, "vc", Label::DF, SynthesisKind::VC, "VC-A"},
  };

  const int n_train = n_per_class / 2;
  const int n_dev = n_per_class / 4;

  for (const auto& spec : classes) {
    for (int i = 0; i < n_per_class; ++i) {
      UtteranceParams p;
      p.duration_s = rng.uniform(2.0, 4.0);
      p.f0 = rng.uniform(110.0, 220.0);
      p.tilt = rng.uniform(0.7, 1.3);
      p.vib_rate = rng.uniform(4.0, 7.0);
      p.vib_depth = rng.uniform(0.015, 0.03);
      p.vib_phase = rng.uniform(0.0, 6.283185307179586);
      p.jit_phase1 = rng.uniform(0.0, 6.283185307179586);
      p.jit_phase2 = rng.uniform(0.0, 6.283185307179586);
      p.amp_rate = rng.uniform(0.3, 1.0);
      p.amp_phase = rng.uniform(0.0, 6.283185307179586);
      const int steps = static_cast<int>(rng.uniform_int(4, 8));
      p.step_levels.resize(static_cast<std::size_t>(steps));
      for (double& lv : p.step_levels) lv = rng.uniform(0.35, 0.95);
      p.step_len_s = rng.uniform(0.3, 0.6);

      AudioBuffer audio = synth_utterance(spec.cls, p, rng);

      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.wav", spec.stem, i);
      const std::filesystem::path file = out_dir / name;
      save_wav(file, audio);

      ManifestRecord rec;
      // Absolute paths so the manifest round-trips regardless of cwd.
      rec.path = std::filesystem::absolute(file).lexically_normal().string();
      rec.label = spec.label;
      rec.system_id = spec.system_id;
      rec.synthesis_kind = spec.kind;
      rec.partition = i < n_train ? Partition::train
                                  : (i < n_train + n_dev ? Partition::dev : Partition::test);
      corpus.records.push_back(std::move(rec));
    }
  }

  write_manifest(out_dir / "manifest.csv", corpus);
  return corpus;
}

}  // namespace prosospeak
