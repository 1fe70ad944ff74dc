#pragma once

#include <span>
#include <string>
#include <vector>

#include "prosospeak/label.hpp"
#include "prosospeak/mat.hpp"

namespace prosospeak {

/// ROC point; the positive class is DF and a sample is predicted DF when its
/// score is >= threshold.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), both rates non-decreasing
};

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels);

/// Trapezoidal area; equals the Mann-Whitney statistic
/// P(score_DF > score_REAL) + P(tie)/2.
double auc(const RocCurve& r);

/// Rate where FPR = FNR, interpolated linearly on the bracketing ROC segment.
double eer(const RocCurve& r);

/// (TPR + TNR) / 2 with DF positive.
double balanced_accuracy(std::span<const Label> pred, std::span<const Label> truth);

struct AttributionRow {
  std::string system_id;
  Label truth = Label::REAL;
  std::size_t count = 0;
  double rate = 0.0;  // fraction of rows predicted as the group's true class
};

/// Per-system correct-attribution table, sorted by system id.
std::vector<AttributionRow> attribution_rates(std::span<const Label> pred,
                                              std::span<const Label> truth,
                                              std::span<const std::string> system_ids);

/// Pairwise sample Pearson coefficients of the columns of F (n x N).
/// block_boundary marks where the speaker block ends and the prosody block
/// begins.
struct CorrelationMatrix {
  MatD r;
  std::size_t block_boundary = 0;
};

CorrelationMatrix pearson_matrix(const MatD& f, std::size_t block_boundary);

/// Copy with the diagonal zeroed (visualization convention).
MatD display_matrix(const CorrelationMatrix& m);

/// Mean/std of |coefficients| per block, diagonals excluded.
struct BlockStats {
  double fs_fs_mean = 0.0, fs_fs_std = 0.0;
  double fp_fp_mean = 0.0, fp_fp_std = 0.0;
  double fs_fp_mean = 0.0, fs_fp_std = 0.0;
};

BlockStats block_stats(const CorrelationMatrix& m);

/// Bundled evaluation outcome for one scenario.
struct EvalReport {
  double auc_value = 0.0;
  double eer_value = 0.0;
  double balanced_accuracy_value = 0.0;
  RocCurve roc;
  std::vector<AttributionRow> attribution;
  std::size_t n_real = 0;
  std::size_t n_df = 0;
};

EvalReport evaluate_scores(std::span<const double> scores, std::span<const Label> truth,
                           std::span<const std::string> system_ids);

}  // namespace prosospeak
