#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "prosospeak/pipeline.hpp"

namespace ps = prosospeak;

namespace {

void print_metrics_line(const char* tag, const ps::EvalReport& rep) {
  // Human-readable summary uses the conventional x100 percentages.
  std::printf("%s: EER %.2f%%  AUC %.2f  BalAcc %.2f%%  (%zu REAL, %zu DF)\n", tag,
              rep.eer_value * 100.0, rep.auc_value * 100.0,
              rep.balanced_accuracy_value * 100.0, rep.n_real, rep.n_df);
}

ps::GridSpec parse_grid(const std::string& grid_arg) {
  if (grid_arg.empty() || grid_arg == "default") return {};
  // single-configuration override: "C=1,kernel=rbf,gamma=scaled"
  ps::GridSpec grid;
  grid.c_values.clear();
  grid.gamma_modes.clear();
  grid.kernels.clear();
  std::string rest = grid_arg;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string item = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) ps::fail("bad --grid item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "C")
      grid.c_values.push_back(std::stod(value));
    else if (key == "kernel")
      grid.kernels.push_back(ps::kernel_kind_from_string(value));
    else if (key == "gamma")
      grid.gamma_modes.push_back(value);
    else
      ps::fail("unknown --grid key '" + key + "'");
  }
  if (grid.c_values.empty()) grid.c_values = {100.0};
  if (grid.gamma_modes.empty()) grid.gamma_modes = {"scaled"};
  if (grid.kernels.empty()) grid.kernels = {ps::KernelKind::rbf};
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ProsoSpeaker synthetic speech detector"};
  app.require_subcommand(1);

  std::string manifest, speaker_weights, prosody_weights, out_path, features_dir;
  std::string model_path, profile = "none", scenario = "ALL", grid_arg = "default";
  std::string arch = "speaker", in_path, scores_path, partition = "test";
  bool force = false, svg = false;
  int workers = 0;
  std::uint64_t seed = 0;
  int n_per_class = 40;
  // encoder dimension overrides for `init`
  int channels = 512, scale = 8, se_hidden = 128, agg_channels = 1536, att_hidden = 128;
  int speaker_out = 192, prosody_out = 128, gru_hidden = 128;
  std::vector<int> conv_channels;

  auto* c_extract = app.add_subcommand("extract", "extract combined embeddings per manifest record");
  c_extract->add_option("--manifest", manifest)->required();
  c_extract->add_option("--speaker-weights", speaker_weights)->required();
  c_extract->add_option("--prosody-weights", prosody_weights)->required();
  c_extract->add_option("--out", out_path)->required();
  c_extract->add_option("--profile", profile, "none|br128|br64|br32");
  c_extract->add_flag("--force", force, "recompute existing feature files");
  c_extract->add_option("--workers", workers);

  std::string dev_manifest;
  auto* c_train = app.add_subcommand("train", "grid-search an SVM on train/dev features");
  c_train->add_option("--train", manifest, "manifest supplying the train partition")->required();
  c_train->add_option("--dev", dev_manifest, "manifest supplying the dev partition");
  c_train->add_option("--features", features_dir)->required();
  c_train->add_option("--grid", grid_arg, "default, or C=..,kernel=..,gamma=..");
  c_train->add_option("--out", out_path)->required();

  auto* c_eval = app.add_subcommand("eval", "score the test partition and emit reports");
  c_eval->add_option("--model", model_path)->required();
  c_eval->add_option("--manifest", manifest)->required();
  c_eval->add_option("--features", features_dir);
  c_eval->add_option("--out", out_path)->required();
  c_eval->add_option("--kinds", scenario, "ALL|TTS|VC");
  c_eval->add_option("--profile", profile, "degrade before extraction (needs weights)");
  c_eval->add_option("--speaker-weights", speaker_weights);
  c_eval->add_option("--prosody-weights", prosody_weights);
  c_eval->add_flag("--svg", svg);
  c_eval->add_option("--workers", workers);

  auto* c_ablate = app.add_subcommand("ablate", "train/eval prosody-only, speaker-only and combined models");
  c_ablate->add_option("--manifest", manifest)->required();
  c_ablate->add_option("--features", features_dir)->required();
  c_ablate->add_option("--out", out_path)->required();
  c_ablate->add_option("--grid", grid_arg);
  c_ablate->add_flag("--svg", svg);
  c_ablate->add_option("--workers", workers);

  auto* c_correlate = app.add_subcommand("correlate", "feature correlation matrix and block stats");
  c_correlate->add_option("--manifest", manifest)->required();
  c_correlate->add_option("--features", features_dir)->required();
  c_correlate->add_option("--out", out_path)->required();
  c_correlate->add_option("--partition", partition, "train|dev|test");
  c_correlate->add_flag("--svg", svg);

  auto* c_degrade = app.add_subcommand("degrade", "apply a degradation profile to one WAV");
  c_degrade->add_option("--profile", profile)->required();
  c_degrade->add_option("--in", in_path)->required();
  c_degrade->add_option("--out", out_path)->required();

  auto* c_synth = app.add_subcommand("synth-corpus", "generate the synthetic desk-scale corpus");
  c_synth->add_option("--seed", seed);
  c_synth->add_option("--n", n_per_class, "utterances per class");
  c_synth->add_option("--out", out_path)->required();

  auto* c_report = app.add_subcommand("report", "recompute reports from a scores.csv");
  c_report->add_option("--scores", scores_path)->required();
  c_report->add_option("--out", out_path)->required();
  c_report->add_option("--kinds", scenario);
  c_report->add_option("--profile", profile);
  c_report->add_flag("--svg", svg);

  auto* c_init = app.add_subcommand("init", "write a seeded random weight archive");
  c_init->add_option("--seed", seed);
  c_init->add_option("--arch", arch, "speaker|prosody")->required();
  c_init->add_option("--out", out_path)->required();
  c_init->add_option("--channels", channels);
  c_init->add_option("--scale", scale);
  c_init->add_option("--se-hidden", se_hidden);
  c_init->add_option("--agg-channels", agg_channels);
  c_init->add_option("--att-hidden", att_hidden);
  c_init->add_option("--speaker-out", speaker_out);
  c_init->add_option("--prosody-out", prosody_out);
  c_init->add_option("--gru-hidden", gru_hidden);
  c_init->add_option("--conv-channels", conv_channels, "six conv widths for the prosody encoder");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_extract->parsed()) {
      ps::ExtractOptions opt;
      opt.manifest = manifest;
      opt.speaker_weights = speaker_weights;
      opt.prosody_weights = prosody_weights;
      opt.out_dir = out_path;
      opt.profile = ps::degradation_label_from_string(profile);
      opt.force = force;
      opt.workers = workers;
      ps::ExtractSummary s = ps::cmd_extract(opt);
      std::printf("extract: %zu total, %zu computed, %zu skipped, %zu failed\n", s.total,
                  s.computed, s.skipped, s.failures.size());
      for (const auto& f : s.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
      return s.failures.empty() ? 0 : 1;
    }
    if (c_train->parsed()) {
      ps::TrainOptions opt;
      opt.manifest = manifest;
      opt.dev_manifest = dev_manifest;
      opt.features_dir = features_dir;
      opt.model_out = out_path;
      opt.grid = parse_grid(grid_arg);
      ps::GridSearchResult r = ps::cmd_train(opt);
      const ps::GridEntry& best = r.entries[r.best_index];
      std::printf("train: %zu configurations, best C=%g gamma=%s kernel=%s dev BalAcc %.2f%%\n",
                  r.entries.size(), best.c_reg, best.gamma_mode.c_str(),
                  ps::to_string(best.kernel).c_str(), best.dev_balanced_accuracy * 100.0);
      return 0;
    }
    if (c_eval->parsed()) {
      ps::EvalOptions opt;
      opt.model = model_path;
      opt.manifest = manifest;
      opt.features_dir = features_dir;
      opt.out_dir = out_path;
      opt.scenario = scenario;
      opt.profile = ps::degradation_label_from_string(profile);
      opt.speaker_weights = speaker_weights;
      opt.prosody_weights = prosody_weights;
      opt.svg = svg;
      opt.workers = workers;
      ps::EvalReport rep = ps::cmd_eval(opt);
      print_metrics_line(("eval " + scenario + "/" + profile).c_str(), rep);
      return 0;
    }
    if (c_ablate->parsed()) {
      ps::AblateOptions opt;
      opt.manifest = manifest;
      opt.features_dir = features_dir;
      opt.out_dir = out_path;
      opt.grid = parse_grid(grid_arg);
      opt.svg = svg;
      opt.workers = workers;
      nlohmann::json table = ps::cmd_ablate(opt);
      for (const auto& row : table.at("results"))
        std::printf("%-9s %-4s AUC %.4f EER %.4f BalAcc %.4f\n",
                    row.at("model").get<std::string>().c_str(),
                    row.at("scenario").get<std::string>().c_str(),
                    row.at("auc").get<double>(), row.at("eer").get<double>(),
                    row.at("balanced_accuracy").get<double>());
      return 0;
    }
    if (c_correlate->parsed()) {
      ps::CorrelateOptions opt;
      opt.manifest = manifest;
      opt.features_dir = features_dir;
      opt.out_dir = out_path;
      opt.partition = ps::partition_from_string(partition);
      opt.svg = svg;
      ps::BlockStats s = ps::cmd_correlate(opt);
      std::printf("correlate: |fs,fs| mean %.4f std %.4f; |fp,fp| mean %.4f std %.4f; "
                  "|fs,fp| mean %.4f std %.4f\n",
                  s.fs_fs_mean, s.fs_fs_std, s.fp_fp_mean, s.fp_fp_std, s.fs_fp_mean,
                  s.fs_fp_std);
      return 0;
    }
    if (c_degrade->parsed()) {
      ps::AudioBuffer a = ps::load_wav(in_path);
      ps::AudioBuffer d =
          ps::degrade(a, ps::DegradationProfile::from_label(profile));
      ps::save_wav(out_path, d);
      std::printf("degrade: %s -> %s (%s)\n", in_path.c_str(), out_path.c_str(),
                  profile.c_str());
      return 0;
    }
    if (c_synth->parsed()) {
      ps::Corpus corpus = ps::make_synthetic_corpus(seed, n_per_class, out_path);
      std::printf("synth-corpus: %zu files (%zu REAL, %zu DF) under %s\n",
                  corpus.records.size(), corpus.count(ps::Label::REAL),
                  corpus.count(ps::Label::DF), out_path.c_str());
      return 0;
    }
    if (c_report->parsed()) {
      ps::ReportOptions opt;
      opt.scores_csv = scores_path;
      opt.out_dir = out_path;
      opt.scenario = scenario;
      opt.profile = ps::degradation_label_from_string(profile);
      opt.svg = svg;
      ps::EvalReport rep = ps::cmd_report(opt);
      print_metrics_line("report", rep);
      return 0;
    }
    if (c_init->parsed()) {
      if (arch == "speaker") {
        ps::SpeakerEncoderConfig cfg;
        cfg.channels = channels;
        cfg.scale = scale;
        cfg.se_hidden = se_hidden;
        cfg.agg_channels = agg_channels;
        cfg.att_hidden = att_hidden;
        cfg.out_dim = speaker_out;
        ps::save_weights(out_path, ps::init_speaker_archive(seed, cfg));
      } else if (arch == "prosody") {
        ps::ProsodyEncoderConfig cfg;
        if (!conv_channels.empty()) cfg.conv_channels = conv_channels;
        cfg.gru_hidden = gru_hidden;
        cfg.out_dim = prosody_out;
        ps::save_weights(out_path, ps::init_prosody_archive(seed, cfg));
      } else {
        ps::fail("--arch must be speaker or prosody");
      }
      std::printf("init: wrote %s archive to %s (seed %llu)\n", arch.c_str(),
                  out_path.c_str(), static_cast<unsigned long long>(seed));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
