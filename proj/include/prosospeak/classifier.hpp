#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prosospeak/features.hpp"
#include "prosospeak/label.hpp"
#include "prosospeak/mat.hpp"

namespace prosospeak {

enum class KernelKind { rbf, polynomial, sigmoid };

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;
  int degree = 3;     // polynomial only
  double coef0 = 0.0; // polynomial and sigmoid
};

double kernel_eval(const KernelSpec& k, std::span<const double> u, std::span<const double> v);

/// Trained soft-margin SVM. dual_coefs hold alpha_i * y_i for the support
/// vectors; decision(f) = sum_i dual_coefs[i] * K(sv_i, f) + bias.
struct SvmModel {
  KernelSpec kernel;
  double C = 1.0;
  MatD support_vectors;            // n_sv x N
  std::vector<double> dual_coefs;  // n_sv
  double bias = 0.0;
  Standardizer standardizer;       // fitted transform the inputs must carry
};

struct SmoOptions {
  double tol = 1e-3;               // KKT violation stopping threshold
  std::int64_t max_iterations = 0; // 0 = automatic cap; exceeded -> error
};

/// Sequential minimal optimization on the dual problem. X must already be
/// standardized; both classes must be present.
SvmModel svm_train(const MatD& x, const std::vector<Label>& y, double c_reg,
                   const KernelSpec& kernel, const SmoOptions& opts = {});

double svm_decision(const SvmModel& m, const FeatureVector& f);
Label svm_predict(const SvmModel& m, const FeatureVector& f);

/// Decision value for an already-standardized raw vector.
double svm_decision_raw(const SvmModel& m, std::span<const double> f);

/// Total dual objective of the stored solution (test support).
double svm_dual_objective(const MatD& x, const std::vector<Label>& y,
                          const std::vector<double>& alpha, const KernelSpec& kernel);

struct GridEntry {
  double c_reg = 0.0;
  std::string gamma_mode;  // "uniform" (1/N) or "scaled" (1/(N*sigma2_f))
  double gamma = 0.0;
  KernelKind kernel = KernelKind::rbf;
  double dev_balanced_accuracy = 0.0;
};

struct GridSpec {
  std::vector<double> c_values = {0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<std::string> gamma_modes = {"uniform", "scaled"};
  std::vector<KernelKind> kernels = {KernelKind::rbf, KernelKind::polynomial,
                                     KernelKind::sigmoid};
};

struct GridSearchResult {
  std::vector<GridEntry> entries;
  std::size_t best_index = 0;
  double sigma2_f = 0.0;  // mean per-dimension variance of the standardized train matrix
  SvmModel model;         // retrained best configuration

  nlohmann::json record() const;
};

/// Fits the standardizer on the training rows, trains one model per grid
/// configuration and picks the best dev balanced accuracy (first in
/// enumeration order on ties: C ascending, gamma mode as listed, kernel
/// rbf -> polynomial -> sigmoid).
GridSearchResult grid_search(const MatD& train_x, const std::vector<Label>& train_y,
                             const MatD& dev_x, const std::vector<Label>& dev_y,
                             const GridSpec& grid = {});

/// Model file round-trip. The archive holds support vectors, dual
/// coefficients and the standardizer; `extra` keys (grid record, feature
/// slice, ...) merge into the file metadata and come back via load_model's
/// out parameter.
void save_model(const std::filesystem::path& path, const SvmModel& m,
                const nlohmann::json& extra = {});
SvmModel load_model(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace prosospeak
