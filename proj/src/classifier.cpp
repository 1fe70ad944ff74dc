#include "prosospeak/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "prosospeak/metrics.hpp"

namespace prosospeak {

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::sigmoid: return "sigmoid";
  }
  fail("invalid kernel kind");
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "polynomial" || s == "poly") return KernelKind::polynomial;
  if (s == "sigmoid") return KernelKind::sigmoid;
  fail("unknown kernel '" + s + "' (expected rbf|polynomial|sigmoid)");
}

double kernel_eval(const KernelSpec& k, std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "kernel_eval: vector length mismatch");
  require(k.gamma > 0.0, "kernel_eval: gamma must be positive");
  switch (k.kind) {
    case KernelKind::rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        d2 += d * d;
      }
      return std::exp(-k.gamma * d2);
    }
    case KernelKind::polynomial: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      double base = k.gamma * dot + k.coef0;
      double r = 1.0;
      for (int d = 0; d < k.degree; ++d) r *= base;
      return r;
    }
    case KernelKind::sigmoid: {
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
      return std::tanh(k.gamma * dot + k.coef0);
    }
  }
  fail("invalid kernel kind");
}

namespace {

/// Lazy kernel row cache. Every computed row is kept for small problems
/// (full Gram); above the row budget the least recently used row is evicted.
class KernelCache {
 public:
  KernelCache(const MatD& x, const KernelSpec& k) : x_(x), kernel_(k) {
    const std::size_t n = x.rows();
    full_ = n <= 8000;
    if (!full_) {
      // ~1 GiB of cached rows
      capacity_ = std::max<std::size_t>(2, (1ull << 30) / (n * sizeof(double)));
    }
    rows_.resize(n);
  }

  const double* row(std::size_t i) {
    if (!rows_[i].empty()) {
      if (!full_) touch(i);
      return rows_[i].data();
    }
    const std::size_t n = x_.rows();
    std::vector<double> r(n);
    for (std::size_t j = 0; j < n; ++j)
      r[j] = kernel_eval(kernel_, {x_.row(i), x_.cols()}, {x_.row(j), x_.cols()});
    rows_[i] = std::move(r);
    if (!full_) {
      lru_.push_front(i);
      pos_[i] = lru_.begin();
      if (lru_.size() > capacity_) {
        std::size_t victim = lru_.back();
        lru_.pop_back();
        pos_.erase(victim);
        rows_[victim].clear();
        rows_[victim].shrink_to_fit();
      }
    }
    return rows_[i].data();
  }

 private:
  void touch(std::size_t i) {
    auto it = pos_.find(i);
    if (it != pos_.end()) lru_.splice(lru_.begin(), lru_, it->second);
  }

  const MatD& x_;
  KernelSpec kernel_;
  bool full_ = true;
  std::size_t capacity_ = 0;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t, std::list<std::size_t>::iterator> pos_;
};

constexpr double kTau = 1e-12;

}  // namespace

SvmModel svm_train(const MatD& x, const std::vector<Label>& y, double c_reg,
                   const KernelSpec& kernel, const SmoOptions& opts) {
  const std::size_t n = x.rows();
  require(n >= 2 && y.size() == n, "svm_train: need matching features and labels");
  require(c_reg > 0.0, "svm_train: C must be positive");
  bool has_pos = false, has_neg = false;
  for (Label l : y) (l == Label::DF ? has_pos : has_neg) = true;
  require(has_pos && has_neg, "svm_train: both classes must be present");
  for (std::size_t i = 0; i < x.size(); ++i)
    require(std::isfinite(x.data()[i]), "svm_train: non-finite feature value");

  std::vector<double> sy(n);
  for (std::size_t i = 0; i < n; ++i) sy[i] = label_sign(y[i]);

  KernelCache cache(x, kernel);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a at a = 0

  const double c = c_reg;
  const double tol = opts.tol;
  const std::int64_t cap = opts.max_iterations > 0
                               ? opts.max_iterations
                               : std::max<std::int64_t>(200000, 2000 * static_cast<std::int64_t>(n));

  double gap = std::numeric_limits<double>::infinity();
  for (std::int64_t iter = 0;; ++iter) {
    // Maximal violating pair over I_up / I_low.
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -sy[t] * grad[t];
      const bool in_up = (sy[t] > 0 && alpha[t] < c) || (sy[t] < 0 && alpha[t] > 0);
      const bool in_low = (sy[t] < 0 && alpha[t] < c) || (sy[t] > 0 && alpha[t] > 0);
      if (in_up && v > m_up) {
        m_up = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = static_cast<std::ptrdiff_t>(t);
      }
    }
    gap = m_up - m_low;
    if (i < 0 || j < 0 || gap < tol) break;
    if (iter >= cap)
      fail("svm_train: SMO did not converge within " + std::to_string(cap) +
           " iterations (KKT gap " + std::to_string(gap) + ")");

    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    const double* ki = cache.row(ui);
    const double* kj = cache.row(uj);

    const double s = sy[ui] * sy[uj];
    double lo, hi;
    if (s > 0) {
      lo = std::max(0.0, alpha[ui] + alpha[uj] - c);
      hi = std::min(c, alpha[ui] + alpha[uj]);
    } else {
      lo = std::max(0.0, alpha[uj] - alpha[ui]);
      hi = std::min(c, c + alpha[uj] - alpha[ui]);
    }

    double eta = ki[ui] + kj[uj] - 2.0 * ki[uj];
    if (eta < kTau) eta = kTau;  // indefinite kernels

    // E_i - E_j in terms of the gradient: E_t = y_t * grad_t.
    const double delta = sy[uj] * (sy[ui] * grad[ui] - sy[uj] * grad[uj]) / eta;
    double aj_new = std::clamp(alpha[uj] + delta, lo, hi);
    double ai_new = alpha[ui] + s * (alpha[uj] - aj_new);

    const double dai = ai_new - alpha[ui];
    const double daj = aj_new - alpha[uj];
    // A clipped step can be arbitrarily small; it still lands the pair
    // exactly on a bound and changes the working sets. Only an exact no-op
    // (which the selection rule cannot produce) would mean a stall.
    if (dai == 0.0 && daj == 0.0) break;
    alpha[ui] = ai_new;
    alpha[uj] = aj_new;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += sy[t] * (sy[ui] * ki[t] * dai + sy[uj] * kj[t] * daj);
  }

  // Bias: average of y_i - dec(x_i) over unbounded support vectors, which is
  // -y_i * grad_i; fall back to the KKT gap midpoint when none exist.
  double bias_acc = 0.0;
  std::size_t bias_n = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 1e-8 * c && alpha[t] < c * (1.0 - 1e-8)) {
      bias_acc += -sy[t] * grad[t];
      ++bias_n;
    }
  }
  double bias;
  if (bias_n > 0) {
    bias = bias_acc / static_cast<double>(bias_n);
  } else {
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -sy[t] * grad[t];
      if ((sy[t] > 0 && alpha[t] < c) || (sy[t] < 0 && alpha[t] > 0))
        m_up = std::max(m_up, v);
      if ((sy[t] < 0 && alpha[t] < c) || (sy[t] > 0 && alpha[t] > 0))
        m_low = std::min(m_low, v);
    }
    bias = (m_up + m_low) / 2.0;
  }

  SvmModel model;
  model.kernel = kernel;
  model.C = c_reg;
  model.bias = bias;
  model.standardizer = Standardizer::identity(x.cols());

  std::size_t n_sv = 0;
  for (double a : alpha)
    if (a > kTau) ++n_sv;
  require(n_sv >= 1, "svm_train: solution has no support vectors");
  model.support_vectors = MatD(n_sv, x.cols());
  model.dual_coefs.reserve(n_sv);
  std::size_t r = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > kTau) {
      std::copy(x.row(t), x.row(t) + x.cols(), model.support_vectors.row(r));
      model.dual_coefs.push_back(alpha[t] * sy[t]);
      ++r;
    }
  }
  return model;
}

double svm_decision_raw(const SvmModel& m, std::span<const double> f) {
  require(f.size() == m.support_vectors.cols(),
          "svm_decision: feature dimensionality mismatch");
  double acc = m.bias;
  for (std::size_t i = 0; i < m.support_vectors.rows(); ++i)
    acc += m.dual_coefs[i] *
           kernel_eval(m.kernel, {m.support_vectors.row(i), m.support_vectors.cols()}, f);
  return acc;
}

double svm_decision(const SvmModel& m, const FeatureVector& f) {
  require(f.standardized, "svm_decision: input is not standardized");
  return svm_decision_raw(m, f.values);
}

Label svm_predict(const SvmModel& m, const FeatureVector& f) {
  return svm_decision(m, f) > 0.0 ? Label::DF : Label::REAL;
}

double svm_dual_objective(const MatD& x, const std::vector<Label>& y,
                          const std::vector<double>& alpha, const KernelSpec& kernel) {
  const std::size_t n = x.rows();
  double obj = 0.0;
  for (double a : alpha) obj += a;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[j] == 0.0) continue;
      obj -= 0.5 * alpha[i] * alpha[j] * label_sign(y[i]) * label_sign(y[j]) *
             kernel_eval(kernel, {x.row(i), x.cols()}, {x.row(j), x.cols()});
    }
  }
  return obj;
}

nlohmann::json GridSearchResult::record() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const auto& e : entries)
    entries_json.push_back({{"C", e.c_reg},
                            {"gamma_mode", e.gamma_mode},
                            {"gamma", e.gamma},
                            {"kernel", to_string(e.kernel)},
                            {"dev_balanced_accuracy", e.dev_balanced_accuracy}});
  return {{"entries", entries_json}, {"best_index", best_index}, {"sigma2_f", sigma2_f}};
}

GridSearchResult grid_search(const MatD& train_x, const std::vector<Label>& train_y,
                             const MatD& dev_x, const std::vector<Label>& dev_y,
                             const GridSpec& grid) {
  require(dev_x.rows() >= 1, "grid_search: empty dev set");
  require(dev_x.cols() == train_x.cols(), "grid_search: train/dev dimensionality mismatch");
  require(!grid.c_values.empty() && !grid.gamma_modes.empty() && !grid.kernels.empty(),
          "grid_search: empty grid");
  {
    bool has_pos = false, has_neg = false;
    for (Label l : dev_y) (l == Label::DF ? has_pos : has_neg) = true;
    require(has_pos && has_neg, "grid_search: dev set must contain both classes");
  }

  Standardizer std_fit = fit_standardizer(train_x);
  MatD std_train = apply_standardizer(std_fit, train_x);
  MatD std_dev = apply_standardizer(std_fit, dev_x);

  // Mean per-dimension variance of the standardized training matrix: 1 for
  // every non-degenerate column by construction, slightly below when columns
  // are constant.
  const std::size_t n = std_train.rows(), d = std_train.cols();
  double sigma2_f = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += std_train(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = std_train(i, j) - mean;
      var += dv * dv;
    }
    sigma2_f += var / static_cast<double>(n);
  }
  sigma2_f /= static_cast<double>(d);

  const double n_dim = static_cast<double>(d);
  auto gamma_of = [&](const std::string& mode) {
    if (mode == "uniform") return 1.0 / n_dim;
    if (mode == "scaled")
      return sigma2_f > 1e-12 ? 1.0 / (n_dim * sigma2_f) : 1.0 / n_dim;
    fail("grid_search: unknown gamma mode '" + mode + "'");
  };

  GridSearchResult result;
  result.sigma2_f = sigma2_f;
  double best_acc = -1.0;
  for (double c_reg : grid.c_values) {
    for (const std::string& mode : grid.gamma_modes) {
      for (KernelKind kk : grid.kernels) {
        KernelSpec spec;
        spec.kind = kk;
        spec.gamma = gamma_of(mode);
        SvmModel model = svm_train(std_train, train_y, c_reg, spec);
        std::vector<Label> pred(std_dev.rows());
        for (std::size_t i = 0; i < std_dev.rows(); ++i)
          pred[i] = svm_decision_raw(model, {std_dev.row(i), std_dev.cols()}) > 0.0
                        ? Label::DF
                        : Label::REAL;
        const double acc = balanced_accuracy(pred, dev_y);
        result.entries.push_back({c_reg, mode, spec.gamma, kk, acc});
        if (acc > best_acc) {
          best_acc = acc;
          result.best_index = result.entries.size() - 1;
          model.standardizer = std_fit;
          result.model = std::move(model);
        }
      }
    }
  }
  return result;
}

void save_model(const std::filesystem::path& path, const SvmModel& m,
                const nlohmann::json& extra) {
  TensorArchive a;
  a.metadata["kind"] = "svm-model";
  a.metadata["kernel"] = {{"kind", to_string(m.kernel.kind)},
                          {"gamma", m.kernel.gamma},
                          {"degree", m.kernel.degree},
                          {"coef0", m.kernel.coef0}};
  a.metadata["C"] = m.C;
  a.metadata["bias"] = m.bias;
  a.metadata["dual_coefs"] = m.dual_coefs;
  a.metadata["standardizer"] = m.standardizer.to_json();
  if (extra.is_object())
    for (const auto& [key, value] : extra.items()) a.metadata[key] = value;

  std::vector<float> sv(m.support_vectors.size());
  for (std::size_t i = 0; i < sv.size(); ++i)
    sv[i] = static_cast<float>(m.support_vectors.data()[i]);
  a.add("support_vectors",
        {static_cast<std::int64_t>(m.support_vectors.rows()),
         static_cast<std::int64_t>(m.support_vectors.cols())},
        std::move(sv));
  save_archive(path, a);
}

SvmModel load_model(const std::filesystem::path& path, nlohmann::json* metadata) {
  TensorArchive a = load_archive(path);
  require(a.metadata.value("kind", "") == "svm-model",
          path.string() + " is not a classifier model file");
  SvmModel m;
  const auto& kj = a.metadata.at("kernel");
  m.kernel.kind = kernel_kind_from_string(kj.at("kind").get<std::string>());
  m.kernel.gamma = kj.at("gamma").get<double>();
  m.kernel.degree = kj.at("degree").get<int>();
  m.kernel.coef0 = kj.at("coef0").get<double>();
  m.C = a.metadata.at("C").get<double>();
  m.bias = a.metadata.at("bias").get<double>();
  m.dual_coefs = a.metadata.at("dual_coefs").get<std::vector<double>>();
  m.standardizer = Standardizer::from_json(a.metadata.at("standardizer"));

  MatF sv = a.matrix("support_vectors");
  require(sv.rows() == m.dual_coefs.size(),
          "model file: support vector count does not match dual coefficients");
  m.support_vectors = MatD(sv.rows(), sv.cols());
  for (std::size_t i = 0; i < sv.size(); ++i)
    m.support_vectors.data()[i] = sv.data()[i];
  if (metadata != nullptr) *metadata = a.metadata;
  return m;
}

}  // namespace prosospeak
