#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prosospeak/audio.hpp"
#include "prosospeak/classifier.hpp"
#include "prosospeak/dataset.hpp"
#include "prosospeak/embeddings.hpp"
#include "prosospeak/metrics.hpp"

namespace prosospeak {

/// Pipeline sampling rate; inputs at other rates are resampled first.
constexpr int kPipelineRate = 16000;
/// format_version stamped into every JSON artifact.
constexpr int kReportFormatVersion = 1;

/// Worker count: PROSOSPEAK_WORKERS wins, then the requested value, then the
/// hardware concurrency.
int effective_workers(int requested);

/// Runs fn(0..n-1) on a worker pool; rethrows the first failure.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Deterministic feature file name for a manifest record (stem plus a hash of
/// the full path, so distinct directories cannot collide).
std::string feature_file_name(const ManifestRecord& rec);

/// Extract the combined embedding of one record: load, resample, optionally
/// degrade, run both encoders, concatenate.
FeatureVector extract_record(const ManifestRecord& rec, const TensorArchive& speaker_w,
                             const SpeakerEncoderConfig& speaker_cfg,
                             const TensorArchive& prosody_w,
                             const ProsodyEncoderConfig& prosody_cfg,
                             DegradationLabel profile);

void write_feature_file(const std::filesystem::path& path, const FeatureVector& f,
                        const ManifestRecord& rec, DegradationLabel profile,
                        std::size_t speaker_dim, std::size_t prosody_dim);
FeatureVector read_feature_file(const std::filesystem::path& path,
                                std::size_t* speaker_dim = nullptr,
                                std::size_t* prosody_dim = nullptr);

struct ExtractOptions {
  std::filesystem::path manifest;
  std::filesystem::path speaker_weights;
  std::filesystem::path prosody_weights;
  std::filesystem::path out_dir;
  DegradationLabel profile = DegradationLabel::none;
  bool force = false;
  int workers = 0;
};

struct ExtractSummary {
  std::size_t total = 0;
  std::size_t computed = 0;
  std::size_t skipped = 0;
  std::vector<std::string> failures;  // "path: reason"
};

ExtractSummary cmd_extract(const ExtractOptions& opt);

/// Column range of the stored combined vector a model consumes.
/// begin == end means the full vector.
struct FeatureSlice {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool full() const { return begin == end; }
  nlohmann::json to_json() const { return {{"begin", begin}, {"end", end}}; }
  static FeatureSlice from_json(const nlohmann::json& j) {
    return {j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>()};
  }
};

struct TrainOptions {
  std::filesystem::path manifest;      // supplies the train partition
  std::filesystem::path dev_manifest;  // supplies the dev partition; empty = same file
  std::filesystem::path features_dir;
  std::filesystem::path model_out;
  GridSpec grid;
  FeatureSlice slice;
};

GridSearchResult cmd_train(const TrainOptions& opt);

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path manifest;
  std::filesystem::path features_dir;
  std::filesystem::path out_dir;
  std::string scenario = "ALL";  // ALL | TTS | VC
  DegradationLabel profile = DegradationLabel::none;
  // weight archives enable on-the-fly extraction (required when profile != none)
  std::filesystem::path speaker_weights;
  std::filesystem::path prosody_weights;
  bool svg = false;
  int workers = 0;
};

EvalReport cmd_eval(const EvalOptions& opt);

struct AblateOptions {
  std::filesystem::path manifest;
  std::filesystem::path features_dir;
  std::filesystem::path out_dir;
  GridSpec grid;
  bool svg = false;
  int workers = 0;
};

/// Trains and evaluates the three embedding-slice models (combined, speaker,
/// prosody) over the three test scenarios (ALL, TTS, VC); returns the
/// summary table that is also written to ablation.json/ablation.csv.
nlohmann::json cmd_ablate(const AblateOptions& opt);

struct CorrelateOptions {
  std::filesystem::path manifest;
  std::filesystem::path features_dir;
  std::filesystem::path out_dir;
  Partition partition = Partition::test;
  bool svg = false;
};

BlockStats cmd_correlate(const CorrelateOptions& opt);

struct ReportOptions {
  std::filesystem::path scores_csv;  // path,label,system_id,score
  std::filesystem::path out_dir;
  std::string scenario = "ALL";
  DegradationLabel profile = DegradationLabel::none;
  bool svg = false;
};

EvalReport cmd_report(const ReportOptions& opt);

/// Shared report writer: metrics.json, roc.csv, attribution.csv and the
/// optional SVG figures.
void write_report_files(const std::filesystem::path& out_dir, const EvalReport& rep,
                        const std::string& scenario, DegradationLabel profile, bool svg);

}  // namespace prosospeak
