#include "prosospeak/features.hpp"

#include <cmath>

namespace prosospeak {

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stdev)
    : mean_(std::move(mean)), stdev_(std::move(stdev)), fitted_(true) {
  require(mean_.size() == stdev_.size(), "standardizer mean/std length mismatch");
  for (double s : stdev_) require(s >= 0.0, "standardizer std must be non-negative");
}

Standardizer Standardizer::identity(std::size_t n) {
  return Standardizer(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0));
}

nlohmann::json Standardizer::to_json() const {
  require(fitted_, "cannot serialize an unfitted standardizer");
  return {{"mean", mean_}, {"std", stdev_}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  return Standardizer(j.at("mean").get<std::vector<double>>(),
                      j.at("std").get<std::vector<double>>());
}

FeatureVector concat(const EmbeddingVector& f_s, const EmbeddingVector& f_p) {
  require(f_s.kind == EmbeddingKind::speaker,
          "concat: first argument must be a speaker embedding, got " + to_string(f_s.kind));
  require(f_p.kind == EmbeddingKind::prosody,
          "concat: second argument must be a prosody embedding, got " + to_string(f_p.kind));
  require(!f_s.values.empty() && !f_p.values.empty(), "concat: empty embedding");
  FeatureVector f;
  f.values.reserve(f_s.values.size() + f_p.values.size());
  for (float v : f_s.values) f.values.push_back(v);
  for (float v : f_p.values) f.values.push_back(v);
  f.standardized = false;
  return f;
}

Standardizer fit_standardizer(const MatD& train_rows) {
  const std::size_t n = train_rows.rows();
  const std::size_t d = train_rows.cols();
  require(n >= 2, "fit_standardizer: need at least 2 training rows");

  std::vector<double> mean(d, 0.0), stdev(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = train_rows.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = train_rows.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dlt = r[j] - mean[j];
      stdev[j] += dlt * dlt;
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    stdev[j] = std::sqrt(stdev[j] / static_cast<double>(n));  // population
  return Standardizer(std::move(mean), std::move(stdev));
}

FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& f) {
  require(s.fitted(), "apply_standardizer: standardizer not fitted");
  require(s.dim() == f.values.size(),
          "apply_standardizer: dimensionality mismatch (" + std::to_string(f.values.size()) +
              " vs " + std::to_string(s.dim()) + ")");
  FeatureVector out;
  out.values.resize(f.values.size());
  for (std::size_t j = 0; j < f.values.size(); ++j)
    out.values[j] =
        s.stdev()[j] > 0.0 ? (f.values[j] - s.mean()[j]) / s.stdev()[j] : 0.0;
  out.standardized = true;
  return out;
}

MatD apply_standardizer(const Standardizer& s, const MatD& rows) {
  require(s.fitted(), "apply_standardizer: standardizer not fitted");
  require(s.dim() == rows.cols(), "apply_standardizer: dimensionality mismatch");
  MatD out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const double* r = rows.row(i);
    double* o = out.row(i);
    for (std::size_t j = 0; j < rows.cols(); ++j)
      o[j] = s.stdev()[j] > 0.0 ? (r[j] - s.mean()[j]) / s.stdev()[j] : 0.0;
  }
  return out;
}

}  // namespace prosospeak
