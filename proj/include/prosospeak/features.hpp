#pragma once

#include <vector>

#include <json.hpp>

#include "prosospeak/embeddings.hpp"
#include "prosospeak/mat.hpp"

namespace prosospeak {

/// Classifier input vector; `standardized` records whether a fitted
/// Standardizer has been applied.
struct FeatureVector {
  std::vector<double> values;
  bool standardized = false;
};

/// Per-dimension training mean and population standard deviation. Immutable
/// once constructed, so dev/test data can only ever be scaled with
/// training statistics.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> stdev);

  /// Identity transform of the given dimensionality.
  static Standardizer identity(std::size_t n);

  bool fitted() const { return fitted_; }
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stdev() const { return stdev_; }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_;
  std::vector<double> stdev_;
  bool fitted_ = false;
};

/// f = [f_s, f_p]; errors unless kinds and configured lengths match.
FeatureVector concat(const EmbeddingVector& f_s, const EmbeddingVector& f_p);

/// Fit per-dimension mean and population std over training rows (>= 2).
Standardizer fit_standardizer(const MatD& train_rows);

/// (f - mean) / std per dimension; zero-std dimensions map to 0.
FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& f);
MatD apply_standardizer(const Standardizer& s, const MatD& rows);

}  // namespace prosospeak
