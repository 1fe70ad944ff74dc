#include "prosospeak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace prosospeak {

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels) {
  require(scores.size() == labels.size(), "roc_curve: scores/labels length mismatch");
  require(!scores.empty(), "roc_curve: empty input");
  std::size_t n_df = 0, n_real = 0;
  for (Label l : labels) (l == Label::DF ? n_df : n_real)++;
  require(n_df > 0 && n_real > 0, "roc_curve: both classes must be present");
  for (double s : scores) require(std::isfinite(s), "roc_curve: non-finite score");

  // Sort by score descending; sweep thresholds over the unique scores so tied
  // scores move together.
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == Label::DF ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(n_real),
                            static_cast<double>(tp) / static_cast<double>(n_df)});
  }
  // The lowest threshold classifies everything as DF, so the sweep always
  // ends at (1,1); no extra endpoint needed.
  return curve;
}

double auc(const RocCurve& r) {
  require(r.points.size() >= 2, "auc: curve needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const RocPoint& a = r.points[i - 1];
    const RocPoint& b = r.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double eer(const RocCurve& r) {
  require(r.points.size() >= 2, "eer: curve needs at least two points");
  // d = FPR - FNR goes from -1 at (0,0) to +1 at (1,1); find the sign change
  // and interpolate along the segment.
  auto diff = [](const RocPoint& p) { return p.fpr - (1.0 - p.tpr); };
  if (diff(r.points.front()) >= 0.0) return r.points.front().fpr;
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const double d1 = diff(r.points[i]);
    if (d1 < 0.0) continue;
    const double d0 = diff(r.points[i - 1]);
    if (d1 == d0) return r.points[i].fpr;
    const double t = -d0 / (d1 - d0);
    return r.points[i - 1].fpr + t * (r.points[i].fpr - r.points[i - 1].fpr);
  }
  return r.points.back().fpr;
}

double balanced_accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  require(pred.size() == truth.size(), "balanced_accuracy: length mismatch");
  require(!truth.empty(), "balanced_accuracy: empty input");
  std::size_t tp = 0, tn = 0, n_df = 0, n_real = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == Label::DF) {
      ++n_df;
      if (pred[i] == Label::DF) ++tp;
    } else {
      ++n_real;
      if (pred[i] == Label::REAL) ++tn;
    }
  }
  require(n_df > 0 && n_real > 0, "balanced_accuracy: both classes must be present");
  const double tpr = static_cast<double>(tp) / static_cast<double>(n_df);
  const double tnr = static_cast<double>(tn) / static_cast<double>(n_real);
  return (tpr + tnr) / 2.0;
}

std::vector<AttributionRow> attribution_rates(std::span<const Label> pred,
                                              std::span<const Label> truth,
                                              std::span<const std::string> system_ids) {
  require(pred.size() == truth.size() && truth.size() == system_ids.size(),
          "attribution_rates: length mismatch");
  require(!truth.empty(), "attribution_rates: empty input");

  struct Group {
    std::size_t count = 0;
    std::size_t correct = 0;
    Label truth = Label::REAL;
    bool mixed = false;
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(!system_ids[i].empty(), "attribution_rates: empty system id");
    Group& g = groups[system_ids[i]];
    if (g.count == 0)
      g.truth = truth[i];
    else if (g.truth != truth[i])
      g.mixed = true;
    ++g.count;
    if (pred[i] == truth[i]) ++g.correct;
  }
  std::vector<AttributionRow> rows;
  rows.reserve(groups.size());
  for (const auto& [id, g] : groups) {
    require(!g.mixed, "attribution_rates: system '" + id + "' mixes REAL and DF rows");
    rows.push_back({id, g.truth, g.count,
                    static_cast<double>(g.correct) / static_cast<double>(g.count)});
  }
  return rows;
}

CorrelationMatrix pearson_matrix(const MatD& f, std::size_t block_boundary) {
  const std::size_t n = f.rows(), d = f.cols();
  require(n >= 2, "pearson_matrix: need at least 2 rows");
  require(block_boundary <= d, "pearson_matrix: block boundary out of range");

  // Center columns and take their norms once.
  MatD centered(n, d);
  std::vector<double> norm(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += f(i, j);
    mean /= static_cast<double>(n);
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = f(i, j) - mean;
      centered(i, j) = v;
      s2 += v * v;
    }
    norm[j] = std::sqrt(s2);
  }

  CorrelationMatrix out;
  out.block_boundary = block_boundary;
  out.r = MatD(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    out.r(a, a) = 1.0;
    for (std::size_t b = a + 1; b < d; ++b) {
      double v = 0.0;
      if (norm[a] > 0.0 && norm[b] > 0.0) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += centered(i, a) * centered(i, b);
        v = std::clamp(dot / (norm[a] * norm[b]), -1.0, 1.0);
      }
      out.r(a, b) = v;
      out.r(b, a) = v;
    }
  }
  return out;
}

MatD display_matrix(const CorrelationMatrix& m) {
  MatD d = m.r;
  for (std::size_t i = 0; i < d.rows(); ++i) d(i, i) = 0.0;
  return d;
}

namespace {

void block_abs_stats(const MatD& r, std::size_t r0, std::size_t r1, std::size_t c0,
                     std::size_t c1, bool skip_diagonal, double& mean, double& stdev) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = r0; i < r1; ++i) {
    for (std::size_t j = c0; j < c1; ++j) {
      if (skip_diagonal && i == j) continue;
      const double v = std::abs(r(i, j));
      sum += v;
      sum2 += v * v;
      ++count;
    }
  }
  mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  stdev = count > 0 ? std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - mean * mean))
                    : 0.0;
}

}  // namespace

BlockStats block_stats(const CorrelationMatrix& m) {
  const std::size_t d = m.r.rows();
  const std::size_t ns = m.block_boundary;
  require(ns >= 1 && ns < d, "block_stats: block boundary must split the matrix");
  BlockStats s;
  block_abs_stats(m.r, 0, ns, 0, ns, true, s.fs_fs_mean, s.fs_fs_std);
  block_abs_stats(m.r, ns, d, ns, d, true, s.fp_fp_mean, s.fp_fp_std);
  block_abs_stats(m.r, 0, ns, ns, d, false, s.fs_fp_mean, s.fs_fp_std);
  return s;
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const Label> truth,
                           std::span<const std::string> system_ids) {
  EvalReport rep;
  rep.roc = roc_curve(scores, truth);
  rep.auc_value = auc(rep.roc);
  rep.eer_value = eer(rep.roc);
  std::vector<Label> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    pred[i] = scores[i] > 0.0 ? Label::DF : Label::REAL;
  rep.balanced_accuracy_value = balanced_accuracy(pred, truth);
  if (!system_ids.empty()) rep.attribution = attribution_rates(pred, truth, system_ids);
  for (Label l : truth) (l == Label::DF ? rep.n_df : rep.n_real)++;
  return rep;
}

}  // namespace prosospeak
