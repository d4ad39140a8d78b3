#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "miltext/tensor.hpp"

namespace miltext {

// 3-class polarity labels produced by the thresholding step.
inline constexpr int kNegative = 1;
inline constexpr int kNeutral = 2;
inline constexpr int kPositive = 3;

// Uniformly spaced class weights w^c = -1 + 2(c-1)/(C-1); antisymmetric,
// spacing 2/(C-1), endpoints -1 and 1.
std::vector<double> polarity_weights(int num_classes);

// g = sum_c p^c w^c in [-1, 1].
double polarity_score(const std::vector<double>& probs, const std::vector<double>& weights);

// Gated polarity g' = alpha * g.
double gate(double polarity, double alpha);

// negative if g' < t1, positive if g' > t2, neutral otherwise (boundaries
// are neutral). Requires t1 <= t2.
int apply_thresholds(double gated, double t1, double t2);

struct ScoredSegment {
  double score = 0.0;  // gated polarity
  int gold = kNeutral;
};

// Round-robin fold assignment: item i lands in fold i % folds.
std::vector<std::vector<int>> make_folds(int count, int folds);

// Exhaustive grid search over t1 <= t2 on a 0.05-spaced grid in [-1, 1]
// maximizing macro-F1; ties prefer the smallest |t1|+|t2|, then the
// lexicographically smallest pair.
std::pair<double, double> search_thresholds_grid(const std::vector<ScoredSegment>& segments, double grid_step = 0.05);

struct ThresholdCvResult {
  std::vector<std::pair<double, double>> fold_thresholds;
  std::vector<double> fold_macro_f1;
  double mean_macro_f1 = 0.0;
};

// Per fold: fit (t1, t2) on the other folds, evaluate on the held-out fold;
// reports the mean held-out macro-F1.
ThresholdCvResult search_thresholds_cv(const std::vector<ScoredSegment>& segments, int folds = 10,
                                       double grid_step = 0.05);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_division = false;  // some denominator was zero and reported as 0
};

// Sample-weighted precision/recall/F1 for one positive class.
Prf prf_weighted(const std::vector<int>& pred, const std::vector<int>& gold, const std::vector<double>& weights,
                 int positive_class);

// Area under the precision-recall curve: descending-confidence sweep,
// step-wise sum of (R_k - R_{k-1}) * P_k, tied confidences share a cut.
// Requires at least one positive and one negative item.
double aupr(const std::vector<double>& confidence, const std::vector<int>& gold, int positive_class);

// Unweighted mean of per-class F1; classes absent from gold and predictions
// contribute 0.
double macro_f1(const std::vector<int>& pred, const std::vector<int>& gold, const std::vector<int>& classes);

struct BootstrapConfig {
  int resample_size = 1000;
  int iterations = 1000;
  std::uint64_t seed = 0;
  int max_retries = 100;
};

// Percentile bootstrap over index resamples of the test population. The
// metric may decline a degenerate resample by returning nullopt; the draw is
// then retried (capped). Each iteration owns a split-off generator, so the
// result does not depend on evaluation order.
std::pair<double, double> bootstrap_ci(const std::function<std::optional<double>(const std::vector<int>&)>& metric,
                                       int population, const BootstrapConfig& config);

// q-th percentile (0..100) with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

}  // namespace miltext
