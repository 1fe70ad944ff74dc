#include "prosospeak/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "prosospeak/dsp.hpp"
#include "prosospeak/svg.hpp"

namespace prosospeak {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::set<SynthesisKind> scenario_kinds(const std::string& scenario) {
  if (scenario == "ALL")
    return {SynthesisKind::TTS, SynthesisKind::VC, SynthesisKind::hybrid,
            SynthesisKind::none};
  if (scenario == "TTS") return {SynthesisKind::TTS};
  if (scenario == "VC") return {SynthesisKind::VC};
  fail("unknown scenario '" + scenario + "' (expected ALL|TTS|VC)");
}

}  // namespace

int effective_workers(int requested) {
  if (const char* env = std::getenv("PROSOSPEAK_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(std::min(v, 64L));
  }
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const int w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string feature_file_name(const ManifestRecord& rec) {
  const std::string stem = std::filesystem::path(rec.path).stem().string();
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%08llx",
                static_cast<unsigned long long>(fnv1a(rec.path) & 0xFFFFFFFFull));
  return stem + "__" + hash + ".psf";
}

FeatureVector extract_record(const ManifestRecord& rec, const TensorArchive& speaker_w,
                             const SpeakerEncoderConfig& speaker_cfg,
                             const TensorArchive& prosody_w,
                             const ProsodyEncoderConfig& prosody_cfg,
                             DegradationLabel profile) {
  AudioBuffer audio = load_wav(rec.path);
  if (audio.sample_rate != kPipelineRate) audio = resample(audio, kPipelineRate);
  if (profile != DegradationLabel::none)
    audio = degrade(audio, DegradationProfile::from_label(profile));

  MfccMap mfcc_map = mfcc(audio, 25.0, 10.0, speaker_cfg.input_dim);
  EmbeddingVector f_s = speaker_embed(mfcc_map, speaker_w, speaker_cfg);
  MelSpectrogram mel = mel_spectrogram(audio, 50.0, 12.5, prosody_cfg.mel_bands);
  EmbeddingVector f_p = prosody_embed(mel, prosody_w, prosody_cfg);
  return concat(f_s, f_p);
}

void write_feature_file(const std::filesystem::path& path, const FeatureVector& f,
                        const ManifestRecord& rec, DegradationLabel profile,
                        std::size_t speaker_dim, std::size_t prosody_dim) {
  TensorArchive a;
  a.metadata["kind"] = "features";
  a.metadata["source_path"] = rec.path;
  a.metadata["label"] = to_string(rec.label);
  a.metadata["system_id"] = rec.system_id;
  a.metadata["synthesis_kind"] = to_string(rec.synthesis_kind);
  a.metadata["partition"] = to_string(rec.partition);
  a.metadata["profile"] = to_string(profile);
  a.metadata["speaker_dim"] = speaker_dim;
  a.metadata["prosody_dim"] = prosody_dim;
  std::vector<float> values(f.values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<float>(f.values[i]);
  const auto dim = static_cast<std::int64_t>(values.size());
  a.add("f", {dim}, std::move(values));
  save_archive(path, a);
}

FeatureVector read_feature_file(const std::filesystem::path& path, std::size_t* speaker_dim,
                                std::size_t* prosody_dim) {
  TensorArchive a = load_archive(path);
  require(a.metadata.value("kind", "") == "features",
          path.string() + " is not a feature file");
  FeatureVector f;
  for (float v : a.tensor("f")) f.values.push_back(v);
  f.standardized = false;
  if (speaker_dim != nullptr) *speaker_dim = a.metadata.at("speaker_dim").get<std::size_t>();
  if (prosody_dim != nullptr) *prosody_dim = a.metadata.at("prosody_dim").get<std::size_t>();
  return f;
}

ExtractSummary cmd_extract(const ExtractOptions& opt) {
  Corpus corpus = parse_manifest(opt.manifest);
  TensorArchive speaker_w = load_weights(opt.speaker_weights);
  SpeakerEncoderConfig speaker_cfg = speaker_config_of(speaker_w);
  TensorArchive prosody_w = load_weights(opt.prosody_weights);
  ProsodyEncoderConfig prosody_cfg = prosody_config_of(prosody_w);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) fail("cannot create output directory " + opt.out_dir.string());

  ExtractSummary summary;
  summary.total = corpus.records.size();
  std::mutex mutex;
  parallel_for(corpus.records.size(), effective_workers(opt.workers), [&](std::size_t i) {
    const ManifestRecord& rec = corpus.records[i];
    const std::filesystem::path out = opt.out_dir / feature_file_name(rec);
    if (!opt.force && std::filesystem::exists(out)) {
      std::lock_guard<std::mutex> lock(mutex);
      ++summary.skipped;
      return;
    }
    try {
      FeatureVector f =
          extract_record(rec, speaker_w, speaker_cfg, prosody_w, prosody_cfg, opt.profile);
      write_feature_file(out, f, rec, opt.profile,
                         static_cast<std::size_t>(speaker_cfg.out_dim),
                         static_cast<std::size_t>(prosody_cfg.out_dim));
      std::lock_guard<std::mutex> lock(mutex);
      ++summary.computed;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mutex);
      summary.failures.push_back(rec.path + ": " + e.what());
    }
  });
  return summary;
}

namespace {

/// Load the stored features of a record set, optionally slicing columns.
void load_features(const std::filesystem::path& features_dir,
                   const std::vector<ManifestRecord>& records, const FeatureSlice& slice,
                   MatD& x, std::vector<Label>& y, std::vector<std::string>& ids) {
  require(!records.empty(), "no records to load features for");
  std::vector<FeatureVector> rows(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::filesystem::path f = features_dir / feature_file_name(records[i]);
    if (!std::filesystem::exists(f))
      fail("missing feature file " + f.string() + " for " + records[i].path +
           "; run `extract` first");
    rows[i] = read_feature_file(f);
  }
  const std::size_t full_dim = rows[0].values.size();
  const std::size_t b = slice.full() ? 0 : slice.begin;
  const std::size_t e = slice.full() ? full_dim : slice.end;
  require(b < e && e <= full_dim, "feature slice out of range");

  x = MatD(records.size(), e - b);
  y.resize(records.size());
  ids.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    require(rows[i].values.size() == full_dim, "inconsistent feature dimensionality");
    std::copy(rows[i].values.begin() + static_cast<std::ptrdiff_t>(b),
              rows[i].values.begin() + static_cast<std::ptrdiff_t>(e), x.row(i));
    y[i] = records[i].label;
    ids[i] = records[i].system_id;
  }
}

}  // namespace

GridSearchResult cmd_train(const TrainOptions& opt) {
  Corpus corpus = parse_manifest(opt.manifest);
  Corpus dev_corpus =
      opt.dev_manifest.empty() || opt.dev_manifest == opt.manifest
          ? corpus
          : parse_manifest(opt.dev_manifest);
  std::vector<ManifestRecord> train = corpus.partition(Partition::train);
  std::vector<ManifestRecord> dev = dev_corpus.partition(Partition::dev);
  require(!train.empty(), "manifest has no train partition");
  require(!dev.empty(), "manifest has no dev partition");

  MatD train_x, dev_x;
  std::vector<Label> train_y, dev_y;
  std::vector<std::string> ignore;
  load_features(opt.features_dir, train, opt.slice, train_x, train_y, ignore);
  load_features(opt.features_dir, dev, opt.slice, dev_x, dev_y, ignore);

  GridSearchResult result = grid_search(train_x, train_y, dev_x, dev_y, opt.grid);

  nlohmann::json extra;
  extra["grid_record"] = result.record();
  extra["slice"] = opt.slice.to_json();
  save_model(opt.model_out, result.model, extra);
  return result;
}

namespace {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<Label> truth;
  std::vector<std::string> ids;
  std::vector<std::string> paths;
};

ScoredSet score_records(const SvmModel& model, const FeatureSlice& slice,
                        const std::vector<ManifestRecord>& records,
                        const EvalOptions& opt) {
  ScoredSet out;
  out.scores.resize(records.size());
  out.truth.resize(records.size());
  out.ids.resize(records.size());
  out.paths.resize(records.size());

  const bool have_weights =
      !opt.speaker_weights.empty() && !opt.prosody_weights.empty();
  std::optional<TensorArchive> speaker_w, prosody_w;
  SpeakerEncoderConfig speaker_cfg;
  ProsodyEncoderConfig prosody_cfg;
  if (have_weights) {
    speaker_w = load_weights(opt.speaker_weights);
    speaker_cfg = speaker_config_of(*speaker_w);
    prosody_w = load_weights(opt.prosody_weights);
    prosody_cfg = prosody_config_of(*prosody_w);
  }
  if (opt.profile != DegradationLabel::none)
    require(have_weights,
            "profile evaluation re-extracts features and needs --speaker-weights/"
            "--prosody-weights");

  parallel_for(records.size(), effective_workers(opt.workers), [&](std::size_t i) {
    const ManifestRecord& rec = records[i];
    FeatureVector f;
    const std::filesystem::path stored = opt.features_dir / feature_file_name(rec);
    if (opt.profile == DegradationLabel::none && !opt.features_dir.empty() &&
        std::filesystem::exists(stored)) {
      f = read_feature_file(stored);
    } else if (have_weights) {
      f = extract_record(rec, *speaker_w, speaker_cfg, *prosody_w, prosody_cfg, opt.profile);
    } else {
      fail("no stored features for " + rec.path +
           " and no weight archives given for on-the-fly extraction");
    }
    if (!slice.full()) {
      require(slice.end <= f.values.size(), "model slice exceeds feature length");
      f.values = std::vector<double>(
          f.values.begin() + static_cast<std::ptrdiff_t>(slice.begin),
          f.values.begin() + static_cast<std::ptrdiff_t>(slice.end));
    }
    FeatureVector std_f = apply_standardizer(model.standardizer, f);
    out.scores[i] = svm_decision(model, std_f);
    out.truth[i] = rec.label;
    out.ids[i] = rec.system_id;
    out.paths[i] = rec.path;
  });
  return out;
}

void write_scores_csv(const std::filesystem::path& path, const ScoredSet& s) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << "path,label,system_id,score\n";
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    out << s.paths[i] << "," << to_string(s.truth[i]) << "," << s.ids[i] << ","
        << fmt_double(s.scores[i]) << "\n";
}

}  // namespace

void write_report_files(const std::filesystem::path& out_dir, const EvalReport& rep,
                        const std::string& scenario, DegradationLabel profile, bool svg) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail("cannot create output directory " + out_dir.string());

  nlohmann::json metrics;
  metrics["format_version"] = kReportFormatVersion;
  metrics["auc"] = rep.auc_value;
  metrics["eer"] = rep.eer_value;
  metrics["balanced_accuracy"] = rep.balanced_accuracy_value;
  metrics["counts"] = {{"real", rep.n_real}, {"df", rep.n_df}, {"total", rep.n_real + rep.n_df}};
  metrics["scenario"] = scenario;
  metrics["profile"] = to_string(profile);
  {
    std::ofstream out(out_dir / "metrics.json");
    if (!out) fail("cannot write metrics.json");
    out << metrics.dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "roc.csv");
    if (!out) fail("cannot write roc.csv");
    out << "threshold,fpr,tpr\n";
    for (const auto& p : rep.roc.points)
      out << fmt_double(p.threshold) << "," << fmt_double(p.fpr) << "," << fmt_double(p.tpr)
          << "\n";
  }
  {
    std::ofstream out(out_dir / "attribution.csv");
    if (!out) fail("cannot write attribution.csv");
    out << "system_id,class,count,rate\n";
    for (const auto& row : rep.attribution)
      out << row.system_id << "," << to_string(row.truth) << "," << row.count << ","
          << fmt_double(row.rate) << "\n";
  }
  if (svg) {
    svg_roc_plot(out_dir / "roc.svg", rep.roc, "ROC (" + scenario + ")");
    if (!rep.attribution.empty())
      svg_bar_plot(out_dir / "attribution.svg", rep.attribution, "Correct attribution");
  }
}

EvalReport cmd_eval(const EvalOptions& opt) {
  nlohmann::json meta;
  SvmModel model = load_model(opt.model, &meta);
  FeatureSlice slice;
  if (meta.contains("slice")) slice = FeatureSlice::from_json(meta.at("slice"));

  Corpus corpus = parse_manifest(opt.manifest);
  Corpus scoped = filter_by_kind(corpus, scenario_kinds(opt.scenario));
  std::vector<ManifestRecord> test = scoped.partition(Partition::test);
  require(!test.empty(), "manifest has no test records for scenario " + opt.scenario);

  ScoredSet scored = score_records(model, slice, test, opt);
  EvalReport rep = evaluate_scores(scored.scores, scored.truth, scored.ids);
  write_report_files(opt.out_dir, rep, opt.scenario, opt.profile, opt.svg);
  write_scores_csv(opt.out_dir / "scores.csv", scored);
  return rep;
}

nlohmann::json cmd_ablate(const AblateOptions& opt) {
  // Dimensions come from any one stored feature file.
  Corpus corpus = parse_manifest(opt.manifest);
  require(!corpus.records.empty(), "empty corpus");
  std::size_t speaker_dim = 0, prosody_dim = 0;
  {
    const std::filesystem::path f =
        opt.features_dir / feature_file_name(corpus.records.front());
    if (!std::filesystem::exists(f))
      fail("missing feature file " + f.string() + "; run `extract` first");
    read_feature_file(f, &speaker_dim, &prosody_dim);
  }

  struct ModelSpec {
    const char* name;
    FeatureSlice slice;
  };
  const ModelSpec models[] = {
      {"combined", FeatureSlice{0, 0}},
      {"speaker", FeatureSlice{0, speaker_dim}},
      {"prosody", FeatureSlice{speaker_dim, speaker_dim + prosody_dim}},
  };
  const char* scenarios[] = {"ALL", "TTS", "VC"};

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) fail("cannot create output directory " + opt.out_dir.string());

  nlohmann::json table = nlohmann::json::array();
  std::ofstream csv_out(opt.out_dir / "ablation.csv");
  if (!csv_out) fail("cannot write ablation.csv");
  csv_out << "model,scenario,auc,eer,balanced_accuracy\n";

  for (const auto& m : models) {
    TrainOptions train_opt;
    train_opt.manifest = opt.manifest;
    train_opt.features_dir = opt.features_dir;
    train_opt.model_out = opt.out_dir / (std::string(m.name) + ".psk");
    train_opt.grid = opt.grid;
    train_opt.slice = m.slice;
    cmd_train(train_opt);

    for (const char* scenario : scenarios) {
      EvalOptions eval_opt;
      eval_opt.model = train_opt.model_out;
      eval_opt.manifest = opt.manifest;
      eval_opt.features_dir = opt.features_dir;
      eval_opt.out_dir = opt.out_dir / m.name / scenario;
      eval_opt.scenario = scenario;
      eval_opt.svg = opt.svg;
      eval_opt.workers = opt.workers;
      EvalReport rep = cmd_eval(eval_opt);
      table.push_back({{"model", m.name},
                       {"scenario", scenario},
                       {"auc", rep.auc_value},
                       {"eer", rep.eer_value},
                       {"balanced_accuracy", rep.balanced_accuracy_value}});
      csv_out << m.name << "," << scenario << "," << fmt_double(rep.auc_value) << ","
              << fmt_double(rep.eer_value) << "," << fmt_double(rep.balanced_accuracy_value)
              << "\n";
    }
  }

  nlohmann::json summary;
  summary["format_version"] = kReportFormatVersion;
  summary["results"] = table;
  std::ofstream out(opt.out_dir / "ablation.json");
  if (!out) fail("cannot write ablation.json");
  out << summary.dump(2) << "\n";
  return summary;
}

BlockStats cmd_correlate(const CorrelateOptions& opt) {
  Corpus corpus = parse_manifest(opt.manifest);
  std::vector<ManifestRecord> records = corpus.partition(opt.partition);
  require(records.size() >= 2, "correlate needs at least 2 records in the " +
                                   to_string(opt.partition) + " partition");

  std::size_t speaker_dim = 0, prosody_dim = 0;
  MatD x;
  {
    std::vector<Label> y;
    std::vector<std::string> ids;
    load_features(opt.features_dir, records, FeatureSlice{}, x, y, ids);
    read_feature_file(opt.features_dir / feature_file_name(records.front()), &speaker_dim,
                      &prosody_dim);
  }

  CorrelationMatrix corr = pearson_matrix(x, speaker_dim);
  MatD disp = display_matrix(corr);
  BlockStats stats = block_stats(corr);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) fail("cannot create output directory " + opt.out_dir.string());

  auto write_matrix = [](const std::filesystem::path& path, const MatD& m) {
    std::ofstream out(path);
    if (!out) fail("cannot write " + path.string());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c)
        out << (c ? "," : "") << fmt_double(m(r, c));
      out << "\n";
    }
  };
  write_matrix(opt.out_dir / "correlation.csv", corr.r);
  write_matrix(opt.out_dir / "correlation_display.csv", disp);

  nlohmann::json stats_json;
  stats_json["format_version"] = kReportFormatVersion;
  stats_json["block_boundary"] = corr.block_boundary;
  stats_json["fs_fs"] = {{"mean", stats.fs_fs_mean}, {"std", stats.fs_fs_std}};
  stats_json["fp_fp"] = {{"mean", stats.fp_fp_mean}, {"std", stats.fp_fp_std}};
  stats_json["fs_fp"] = {{"mean", stats.fs_fp_mean}, {"std", stats.fs_fp_std}};
  {
    std::ofstream out(opt.out_dir / "block_stats.json");
    if (!out) fail("cannot write block_stats.json");
    out << stats_json.dump(2) << "\n";
  }
  if (opt.svg)
    svg_heatmap(opt.out_dir / "correlation.svg", disp, "Feature correlation (diagonal zeroed)");
  return stats;
}

EvalReport cmd_report(const ReportOptions& opt) {
  std::ifstream in(opt.scores_csv);
  if (!in) fail("cannot open scores file: " + opt.scores_csv.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty scores file");
  ScoredSet s;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string path, label, id, score;
    if (!std::getline(ss, path, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, id, ',') || !std::getline(ss, score))
      fail("malformed scores row at line " + std::to_string(line_no));
    s.paths.push_back(path);
    s.truth.push_back(label_from_string(label));
    s.ids.push_back(id);
    try {
      s.scores.push_back(std::stod(score));
    } catch (const std::exception&) {
      fail("bad score value at line " + std::to_string(line_no));
    }
  }
  EvalReport rep = evaluate_scores(s.scores, s.truth, s.ids);
  write_report_files(opt.out_dir, rep, opt.scenario, opt.profile, opt.svg);
  return rep;
}

}  // namespace prosospeak
