#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "prosospeak/pipeline.hpp"

namespace py = pybind11;
namespace ps = prosospeak;

namespace {

py::array_t<double> to_numpy(const ps::MatD& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

ps::MatD matd_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  ps::require(a.ndim() == 2, "expected a 2-D array");
  ps::MatD m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data());
  return m;
}

ps::MatF matf_from(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  ps::require(a.ndim() == 2, "expected a 2-D array");
  ps::MatF m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data());
  return m;
}

std::vector<ps::Label> labels_from(const std::vector<std::string>& raw) {
  std::vector<ps::Label> out;
  out.reserve(raw.size());
  for (const auto& s : raw) out.push_back(ps::label_from_string(s));
  return out;
}

py::array_t<float> vecf_to_numpy(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic speech detection: embedding extraction, SVM training and evaluation";

  py::register_exception<ps::Error>(m, "ProsospeakError", PyExc_RuntimeError);

  // ---- audio ----
  py::class_<ps::AudioBuffer>(m, "AudioBuffer")
      .def(py::init([](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
                       int rate) {
             ps::AudioBuffer a;
             a.samples.assign(samples.data(), samples.data() + samples.size());
             a.sample_rate = rate;
             return a;
           }),
           py::arg("samples"), py::arg("sample_rate"))
      .def_property_readonly("samples",
                             [](const ps::AudioBuffer& a) {
                               py::array_t<double> out(
                                   static_cast<py::ssize_t>(a.samples.size()));
                               std::copy(a.samples.begin(), a.samples.end(),
                                         out.mutable_data());
                               return out;
                             })
      .def_readonly("sample_rate", &ps::AudioBuffer::sample_rate)
      .def("duration_s", &ps::AudioBuffer::duration_s);

  m.def("load_wav", &ps::load_wav, py::arg("path"));
  m.def("save_wav", &ps::save_wav, py::arg("path"), py::arg("audio"));
  m.def("resample", &ps::resample, py::arg("audio"), py::arg("target_fs"));
  m.def(
      "degrade",
      [](const ps::AudioBuffer& a, const std::string& profile) {
        return ps::degrade(a, ps::DegradationProfile::from_label(profile));
      },
      py::arg("audio"), py::arg("profile"));

  // ---- dsp ----
  m.def(
      "stft",
      [](const ps::AudioBuffer& a, double win_ms, double hop_ms, int fft_size) {
        return to_numpy(ps::stft(a, win_ms, hop_ms, fft_size).magnitudes);
      },
      py::arg("audio"), py::arg("window_len_ms"), py::arg("hop_ms"), py::arg("fft_size"));
  m.def(
      "mel_spectrogram",
      [](const ps::AudioBuffer& a, double win_ms, double hop_ms, int bands) {
        return to_numpy(ps::mel_spectrogram(a, win_ms, hop_ms, bands).values);
      },
      py::arg("audio"), py::arg("window_len_ms") = 50.0, py::arg("hop_ms") = 12.5,
      py::arg("bands") = 80);
  m.def(
      "mfcc",
      [](const ps::AudioBuffer& a, double win_ms, double hop_ms, int coefficients) {
        return to_numpy(ps::mfcc(a, win_ms, hop_ms, coefficients).values);
      },
      py::arg("audio"), py::arg("window_len_ms") = 25.0, py::arg("hop_ms") = 10.0,
      py::arg("coefficients") = 80);
  m.def(
      "mel_filterbank",
      [](int bands, int fft_size, int fs, double f_min, double f_max) {
        return to_numpy(ps::mel_filterbank(bands, fft_size, fs, f_min, f_max));
      },
      py::arg("bands"), py::arg("fft_size"), py::arg("sample_rate"), py::arg("f_min") = 0.0,
      py::arg("f_max") = 8000.0);
  m.def(
      "dct_ii",
      [](const std::vector<double>& v, int count) {
        return ps::dct_ii(std::span<const double>(v.data(), v.size()), count);
      },
      py::arg("values"), py::arg("count"));

  // ---- encoders / weight archives ----
  py::class_<ps::TensorArchive>(m, "TensorArchive")
      .def("tensor_names",
           [](const ps::TensorArchive& a) {
             std::vector<std::string> names;
             for (const auto& e : a.entries()) names.push_back(e.name);
             return names;
           })
      .def("tensor", [](const ps::TensorArchive& a,
                        const std::string& name) { return vecf_to_numpy(a.tensor(name)); })
      .def_property_readonly("metadata", [](const ps::TensorArchive& a) {
        return a.metadata.dump();
      });

  m.def(
      "init_speaker_archive",
      [](std::uint64_t seed, int channels, int scale, int se_hidden, int agg_channels,
         int att_hidden, int out_dim) {
        ps::SpeakerEncoderConfig cfg;
        cfg.channels = channels;
        cfg.scale = scale;
        cfg.se_hidden = se_hidden;
        cfg.agg_channels = agg_channels;
        cfg.att_hidden = att_hidden;
        cfg.out_dim = out_dim;
        return ps::init_speaker_archive(seed, cfg);
      },
      py::arg("seed"), py::arg("channels") = 512, py::arg("scale") = 8,
      py::arg("se_hidden") = 128, py::arg("agg_channels") = 1536, py::arg("att_hidden") = 128,
      py::arg("out_dim") = 192);
  m.def(
      "init_prosody_archive",
      [](std::uint64_t seed, const std::vector<int>& conv_channels, int gru_hidden,
         int out_dim) {
        ps::ProsodyEncoderConfig cfg;
        if (!conv_channels.empty()) cfg.conv_channels = conv_channels;
        cfg.gru_hidden = gru_hidden;
        cfg.out_dim = out_dim;
        return ps::init_prosody_archive(seed, cfg);
      },
      py::arg("seed"), py::arg("conv_channels") = std::vector<int>{},
      py::arg("gru_hidden") = 128, py::arg("out_dim") = 128);
  m.def("load_weights", &ps::load_weights, py::arg("path"));
  m.def("save_weights", &ps::save_weights, py::arg("path"), py::arg("archive"));

  m.def(
      "speaker_embed",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mfcc_map,
         const ps::TensorArchive& w) {
        ps::MfccMap mm;
        mm.values = matd_from(mfcc_map);
        mm.coefficients = static_cast<int>(mm.values.cols());
        return vecf_to_numpy(ps::speaker_embed(mm, w, ps::speaker_config_of(w)).values);
      },
      py::arg("mfcc_map"), py::arg("weights"));
  m.def(
      "prosody_embed",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mel_map,
         const ps::TensorArchive& w) {
        ps::MelSpectrogram mel;
        mel.values = matd_from(mel_map);
        mel.bands = static_cast<int>(mel.values.cols());
        return vecf_to_numpy(ps::prosody_embed(mel, w, ps::prosody_config_of(w)).values);
      },
      py::arg("mel_map"), py::arg("weights"));
  m.def(
      "gru_forward",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& seq,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& w_ih,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& w_hh,
         const std::vector<float>& b_ih, const std::vector<float>& b_hh) {
        ps::GruWeights w{matf_from(w_ih), matf_from(w_hh), b_ih, b_hh};
        return vecf_to_numpy(ps::gru_forward(matf_from(seq), w));
      },
      py::arg("seq"), py::arg("w_ih"), py::arg("w_hh"), py::arg("b_ih"), py::arg("b_hh"));
  m.def(
      "attentive_stats_pool",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& h,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& w1,
         const std::vector<float>& b1,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& w2,
         const std::vector<float>& b2) {
        ps::AttentionParams att{matf_from(w1), b1, matf_from(w2), b2};
        return vecf_to_numpy(ps::attentive_stats_pool(matf_from(h), att));
      },
      py::arg("h"), py::arg("w1"), py::arg("b1"), py::arg("w2"), py::arg("b2"));

  // ---- features / classifier ----
  py::class_<ps::Standardizer>(m, "Standardizer")
      .def_property_readonly("mean", &ps::Standardizer::mean)
      .def_property_readonly("std", &ps::Standardizer::stdev);
  m.def(
      "fit_standardizer",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& rows) {
        return ps::fit_standardizer(matd_from(rows));
      },
      py::arg("rows"));
  m.def(
      "apply_standardizer",
      [](const ps::Standardizer& s,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& rows) {
        return to_numpy(ps::apply_standardizer(s, matd_from(rows)));
      },
      py::arg("standardizer"), py::arg("rows"));

  py::class_<ps::SvmModel>(m, "SvmModel")
      .def_property_readonly("n_support_vectors",
                             [](const ps::SvmModel& m_) { return m_.support_vectors.rows(); })
      .def_readonly("bias", &ps::SvmModel::bias)
      .def_readonly("C", &ps::SvmModel::C);
  m.def(
      "svm_train",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const std::vector<std::string>& y, double c_reg, const std::string& kernel,
         double gamma, int degree, double coef0) {
        ps::KernelSpec spec;
        spec.kind = ps::kernel_kind_from_string(kernel);
        spec.gamma = gamma;
        spec.degree = degree;
        spec.coef0 = coef0;
        return ps::svm_train(matd_from(x), labels_from(y), c_reg, spec);
      },
      py::arg("x"), py::arg("y"), py::arg("C") = 1.0, py::arg("kernel") = "rbf",
      py::arg("gamma") = 1.0, py::arg("degree") = 3, py::arg("coef0") = 0.0);
  m.def(
      "svm_decision",
      [](const ps::SvmModel& model,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        ps::require(x.ndim() == 2, "expected a 2-D array of standardized rows");
        const auto n = static_cast<std::size_t>(x.shape(0));
        const auto d = static_cast<std::size_t>(x.shape(1));
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i)
          scores[i] = ps::svm_decision_raw(model, {x.data() + i * d, d});
        return scores;
      },
      py::arg("model"), py::arg("rows"));
  m.def(
      "kernel_eval",
      [](const std::string& kernel, double gamma, int degree, double coef0,
         const std::vector<double>& u, const std::vector<double>& v) {
        ps::KernelSpec spec;
        spec.kind = ps::kernel_kind_from_string(kernel);
        spec.gamma = gamma;
        spec.degree = degree;
        spec.coef0 = coef0;
        return ps::kernel_eval(spec, u, v);
      },
      py::arg("kernel"), py::arg("gamma"), py::arg("degree"), py::arg("coef0"), py::arg("u"),
      py::arg("v"));

  // ---- metrics ----
  m.def(
      "roc_curve",
      [](const std::vector<double>& scores, const std::vector<std::string>& labels) {
        ps::RocCurve c = ps::roc_curve(scores, labels_from(labels));
        std::vector<std::tuple<double, double, double>> pts;
        for (const auto& p : c.points) pts.emplace_back(p.threshold, p.fpr, p.tpr);
        return pts;
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<std::string>& labels) {
        return ps::auc(ps::roc_curve(scores, labels_from(labels)));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "eer",
      [](const std::vector<double>& scores, const std::vector<std::string>& labels) {
        return ps::eer(ps::roc_curve(scores, labels_from(labels)));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "balanced_accuracy",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
        return ps::balanced_accuracy(labels_from(pred), labels_from(truth));
      },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "pearson_matrix",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& rows,
         std::size_t block_boundary) {
        return to_numpy(ps::pearson_matrix(matd_from(rows), block_boundary).r);
      },
      py::arg("rows"), py::arg("block_boundary") = 0);

  // ---- dataset / pipeline ----
  m.def(
      "synth_corpus",
      [](std::uint64_t seed, int n_per_class, const std::filesystem::path& out_dir) {
        ps::Corpus c = ps::make_synthetic_corpus(seed, n_per_class, out_dir);
        return c.records.size();
      },
      py::arg("seed"), py::arg("n_per_class"), py::arg("out_dir"));
  m.def(
      "extract",
      [](const std::filesystem::path& manifest, const std::filesystem::path& speaker_weights,
         const std::filesystem::path& prosody_weights, const std::filesystem::path& out_dir,
         const std::string& profile, bool force, int workers) {
        ps::ExtractOptions opt;
        opt.manifest = manifest;
        opt.speaker_weights = speaker_weights;
        opt.prosody_weights = prosody_weights;
        opt.out_dir = out_dir;
        opt.profile = ps::degradation_label_from_string(profile);
        opt.force = force;
        opt.workers = workers;
        ps::ExtractSummary s = ps::cmd_extract(opt);
        if (!s.failures.empty()) ps::fail("extraction failed for: " + s.failures.front());
        return py::make_tuple(s.total, s.computed, s.skipped);
      },
      py::arg("manifest"), py::arg("speaker_weights"), py::arg("prosody_weights"),
      py::arg("out_dir"), py::arg("profile") = "none", py::arg("force") = false,
      py::arg("workers") = 0);
  m.def(
      "train",
      [](const std::filesystem::path& manifest, const std::filesystem::path& features_dir,
         const std::filesystem::path& model_out) {
        ps::TrainOptions opt;
        opt.manifest = manifest;
        opt.features_dir = features_dir;
        opt.model_out = model_out;
        ps::GridSearchResult r = ps::cmd_train(opt);
        const ps::GridEntry& best = r.entries[r.best_index];
        return py::dict(py::arg("configurations") = r.entries.size(),
                        py::arg("best_C") = best.c_reg,
                        py::arg("best_kernel") = ps::to_string(best.kernel),
                        py::arg("best_gamma_mode") = best.gamma_mode,
                        py::arg("dev_balanced_accuracy") = best.dev_balanced_accuracy);
      },
      py::arg("manifest"), py::arg("features_dir"), py::arg("model_out"));
  m.def(
      "evaluate",
      [](const std::filesystem::path& model, const std::filesystem::path& manifest,
         const std::filesystem::path& features_dir, const std::filesystem::path& out_dir,
         const std::string& scenario, const std::string& profile,
         const std::filesystem::path& speaker_weights,
         const std::filesystem::path& prosody_weights) {
        ps::EvalOptions opt;
        opt.model = model;
        opt.manifest = manifest;
        opt.features_dir = features_dir;
        opt.out_dir = out_dir;
        opt.scenario = scenario;
        opt.profile = ps::degradation_label_from_string(profile);
        opt.speaker_weights = speaker_weights;
        opt.prosody_weights = prosody_weights;
        ps::EvalReport rep = ps::cmd_eval(opt);
        return py::dict(py::arg("auc") = rep.auc_value, py::arg("eer") = rep.eer_value,
                        py::arg("balanced_accuracy") = rep.balanced_accuracy_value,
                        py::arg("n_real") = rep.n_real, py::arg("n_df") = rep.n_df);
      },
      py::arg("model"), py::arg("manifest"), py::arg("features_dir"), py::arg("out_dir"),
      py::arg("scenario") = "ALL", py::arg("profile") = "none",
      py::arg("speaker_weights") = std::filesystem::path(),
      py::arg("prosody_weights") = std::filesystem::path());

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "0.1.0";
#endif
}
