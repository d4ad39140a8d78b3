#include "miltext/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "miltext/rng.hpp"

namespace miltext {

std::vector<double> polarity_weights(int num_classes) {
  if (num_classes < 2) throw Error("polarity_weights: need at least 2 classes");
  std::vector<double> w(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) w[static_cast<size_t>(c)] = -1.0 + 2.0 * c / (num_classes - 1);
  return w;
}

double polarity_score(const std::vector<double>& probs, const std::vector<double>& weights) {
  if (probs.size() != weights.size())
    throw Error("polarity_score: " + std::to_string(probs.size()) + " probabilities vs " +
                std::to_string(weights.size()) + " weights");
  double g = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) g += probs[i] * weights[i];
  return g;
}

double gate(double polarity, double alpha) { return alpha * polarity; }

int apply_thresholds(double gated, double t1, double t2) {
  if (t1 > t2) throw Error("apply_thresholds: t1 > t2");
  if (gated < t1) return kNegative;
  if (gated > t2) return kPositive;
  return kNeutral;
}

std::vector<std::vector<int>> make_folds(int count, int folds) {
  if (folds < 2 || count < folds) throw Error("make_folds: need at least " + std::to_string(folds) + " items");
  std::vector<std::vector<int>> out(static_cast<size_t>(folds));
  for (int i = 0; i < count; ++i) out[static_cast<size_t>(i % folds)].push_back(i);
  return out;
}

namespace {

double macro_f1_at(const std::vector<ScoredSegment>& segments, const std::vector<int>& index, double t1, double t2) {
  std::vector<int> pred, gold;
  pred.reserve(index.size());
  gold.reserve(index.size());
  for (int i : index) {
    pred.push_back(apply_thresholds(segments[static_cast<size_t>(i)].score, t1, t2));
    gold.push_back(segments[static_cast<size_t>(i)].gold);
  }
  return macro_f1(pred, gold, {kNegative, kNeutral, kPositive});
}

std::vector<int> all_indices(size_t n) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

std::pair<double, double> grid_search(const std::vector<ScoredSegment>& segments, const std::vector<int>& index,
                                      double grid_step) {
  int steps = static_cast<int>(std::llround(2.0 / grid_step));
  double best_f1 = -1.0;
  double best_abs = 0.0;
  std::pair<double, double> best{-1.0, -1.0};
  for (int i = 0; i <= steps; ++i) {
    double t1 = -1.0 + grid_step * i;
    for (int j = i; j <= steps; ++j) {
      double t2 = -1.0 + grid_step * j;
      double f1 = macro_f1_at(segments, index, t1, t2);
      double abs_sum = std::abs(t1) + std::abs(t2);
      bool better = f1 > best_f1 || (f1 == best_f1 && abs_sum < best_abs);
      if (better) {
        best_f1 = f1;
        best_abs = abs_sum;
        best = {t1, t2};
      }
    }
  }
  return best;
}

}  // namespace

std::pair<double, double> search_thresholds_grid(const std::vector<ScoredSegment>& segments, double grid_step) {
  if (segments.empty()) throw Error("search_thresholds_grid: no segments");
  return grid_search(segments, all_indices(segments.size()), grid_step);
}

ThresholdCvResult search_thresholds_cv(const std::vector<ScoredSegment>& segments, int folds, double grid_step) {
  auto fold_index = make_folds(static_cast<int>(segments.size()), folds);
  for (const auto& f : fold_index)
    if (f.empty()) throw Error("search_thresholds_cv: empty fold");

  ThresholdCvResult result;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    for (int g = 0; g < folds; ++g)
      if (g != f) train.insert(train.end(), fold_index[static_cast<size_t>(g)].begin(), fold_index[static_cast<size_t>(g)].end());
    auto [t1, t2] = grid_search(segments, train, grid_step);
    result.fold_thresholds.emplace_back(t1, t2);
    result.fold_macro_f1.push_back(macro_f1_at(segments, fold_index[static_cast<size_t>(f)], t1, t2));
  }
  for (double v : result.fold_macro_f1) result.mean_macro_f1 += v;
  result.mean_macro_f1 /= static_cast<double>(folds);
  return result;
}

Prf prf_weighted(const std::vector<int>& pred, const std::vector<int>& gold, const std::vector<double>& weights,
                 int positive_class) {
  if (pred.size() != gold.size() || pred.size() != weights.size())
    throw Error("prf_weighted: size mismatch between predictions, gold and weights");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] == positive_class, g = gold[i] == positive_class;
    if (p && g) tp += weights[i];
    else if (p) fp += weights[i];
    else if (g) fn += weights[i];
  }
  Prf out;
  if (tp + fp > 0.0) out.precision = tp / (tp + fp);
  else out.zero_division = true;
  if (tp + fn > 0.0) out.recall = tp / (tp + fn);
  else out.zero_division = true;
  if (out.precision + out.recall > 0.0)
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  else
    out.zero_division = true;
  return out;
}

double aupr(const std::vector<double>& confidence, const std::vector<int>& gold, int positive_class) {
  if (confidence.size() != gold.size()) throw Error("aupr: size mismatch");
  long long positives = 0;
  for (int g : gold) positives += g == positive_class;
  if (positives == 0 || positives == static_cast<long long>(gold.size()))
    throw Error("aupr: needs at least one positive and one negative item");

  std::vector<int> order = all_indices(confidence.size());
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return confidence[static_cast<size_t>(a)] > confidence[static_cast<size_t>(b)]; });

  double area = 0.0;
  double prev_recall = 0.0;
  long long tp = 0, seen = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;  // tied confidences share one cut point
    while (j < order.size() &&
           confidence[static_cast<size_t>(order[j])] == confidence[static_cast<size_t>(order[i])])
      ++j;
    for (size_t k = i; k < j; ++k) {
      ++seen;
      tp += gold[static_cast<size_t>(order[k])] == positive_class;
    }
    double recall = static_cast<double>(tp) / static_cast<double>(positives);
    double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double macro_f1(const std::vector<int>& pred, const std::vector<int>& gold, const std::vector<int>& classes) {
  if (pred.size() != gold.size()) throw Error("macro_f1: size mismatch");
  if (classes.empty()) throw Error("macro_f1: no classes");
  double total = 0.0;
  for (int cls : classes) {
    long long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      bool p = pred[i] == cls, g = gold[i] == cls;
      if (p && g) ++tp;
      else if (p) ++fp;
      else if (g) ++fn;
    }
    double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    total += f1;
  }
  return total / static_cast<double>(classes.size());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile: no values");
  std::sort(values.begin(), values.end());
  double rank = q / 100.0 * (static_cast<double>(values.size()) - 1.0);
  size_t lo = static_cast<size_t>(rank);
  size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::pair<double, double> bootstrap_ci(const std::function<std::optional<double>(const std::vector<int>&)>& metric,
                                       int population, const BootstrapConfig& config) {
  if (population <= 0) throw Error("bootstrap_ci: empty population");
  if (config.iterations < 200) throw Error("bootstrap_ci: needs at least 200 iterations");
  std::vector<double> values;
  values.reserve(static_cast<size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    Rng rng(Rng::mix(config.seed, static_cast<std::uint64_t>(it)));
    std::optional<double> value;
    int tries = 0;
    while (!value) {
      if (++tries > config.max_retries)
        throw Error("bootstrap_ci: metric undefined after " + std::to_string(config.max_retries) + " redraws");
      std::vector<int> sample(static_cast<size_t>(config.resample_size));
      for (int& s : sample) s = rng.uniform_int(population);
      value = metric(sample);
    }
    values.push_back(*value);
  }
  return {percentile(values, 2.5), percentile(values, 97.5)};
}

}  // namespace miltext
