#ifndef BPSEG_EVALUATION_HPP
#define BPSEG_EVALUATION_HPP

#include <span>
#include <vector>

#include "bpseg/grid.hpp"

namespace bpseg {

/** Binary classification tallies with BP as the positive class. */
struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;

  long long total() const { return tp + fp + tn + fn; }
};

/** Tally predictions against ground truth. Throws on length mismatch. */
ConfusionCounts confusion(std::span<const Label> predicted, std::span<const Label> truth);

/** (TP + TN) / (TP + FP + TN + FN). Throws when the total is zero. */
double accuracy(const ConfusionCounts& c);

struct F1Result {
  double value = 0.0;
  bool degenerate = false;  // no positives anywhere (2TP + FP + FN == 0)
};

/** 2TP / (2TP + FP + FN). The no-positives-anywhere case returns 1.0 flagged degenerate. */
F1Result f1(const ConfusionCounts& c);

struct DscResult {
  double value = 0.0;
  bool empty_both = false;  // both masks empty; value fixed at 1.0
};

/** Dice similarity coefficient 2|M ∩ GT| / (|M| + |GT|) over binary grids.
 *
 * Empty-vs-empty is defined as 1.0 and flagged so callers can exclude those
 * samples if they want the strict overlap-only convention. Throws on shape
 * mismatch or non-binary values.
 */
DscResult dsc(const Mask& predicted, const Mask& ground_truth);

enum class StatTest { SHAPIRO_WILK, T_TWO_SIDED };

struct StatTestResult {
  double statistic = 0.0;
  double p_value = 0.0;
  StatTest test = StatTest::SHAPIRO_WILK;
  std::vector<int> n;  // sample sizes (one entry per group)
};

/** Shapiro-Wilk normality test (Royston's AS R94 approximation).
 *
 * Supports 3 <= n <= 50. Throws on out-of-range n or a constant sample.
 */
StatTestResult shapiro_wilk(std::span<const double> samples);

enum class TTestKind { WELCH, STUDENT_POOLED };

/** Two-sided two-sample t-test. Statistic sign follows mean(a) - mean(b).
 *
 * Welch (unequal variances) by default with a Student pooled-variance
 * option. Each group needs n >= 2 and at least one group must have nonzero
 * variance; otherwise this throws.
 */
StatTestResult t_test_two_sided(std::span<const double> a, std::span<const double> b,
                                TTestKind kind = TTestKind::WELCH);

struct FoldAggregate {
  double mean = 0.0;
  double stddev = 0.0;        // sample (n-1) convention
  bool degenerate = false;    // fewer than two folds
  std::vector<double> per_fold;
};

/** Mean and sample standard deviation over per-fold metric values.
 *
 * A single fold yields stddev 0 with the degenerate flag set. Throws on an
 * empty input.
 */
FoldAggregate aggregate_folds(std::span<const double> per_fold);

}  // namespace bpseg

#endif
