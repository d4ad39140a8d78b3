#pragma once

#include <cstdint>
#include <vector>

#include "miltext/adadelta.hpp"
#include "miltext/corpus.hpp"
#include "miltext/models.hpp"

namespace miltext {

struct TrainConfig {
  int batch_size = 200;
  int max_epochs = 50;
  int patience = 10;      // epochs without validation improvement before stopping
  double learning_rate = 0.005;
  double rho = 0.95;
  double epsilon = 1e-6;
  double l2 = 1e-5;       // on the segment-classifier weight matrix
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
};

struct Batch {
  std::vector<int> review_indices;
  int max_segments = 0;
};

// Batches of reviews with similar segment counts: reviews sorted by M and
// chunked; `order` is the seeded iteration order over those chunks. Padding
// inside a batch is tracked per review against max_segments.
struct BatchPlan {
  std::vector<Batch> batches;  // in ascending-M order
  std::vector<int> order;
};

BatchPlan make_batches(const Corpus& corpus, int batch_size, std::uint64_t seed);

// Weighted negative log-likelihood, the value form:
// -(sum_r w_r ln p_r[y_r]) / (sum_r w_r). Labels are 1-based.
double nll_value(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
                 const std::vector<double>& weights);

// Graph form, plus the L2 penalty on the classifier weights.
Ref nll_loss_graph(Tape& t, const std::vector<Ref>& review_probs, const std::vector<int>& labels,
                   const std::vector<double>& weights, Ref clf_w, double l2);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochStats> log;
};

// Epoch loop with Adadelta updates and early stopping on validation loss;
// returns the best-validation checkpoint, never the last one. Aborts with a
// diagnostic if the loss diverges to NaN. The model is left holding the best
// parameters.
TrainResult train(NeuralModel& model, const Corpus& train_split, const Corpus& val_split, const TrainConfig& config);

// Validation-style loss of the current parameters (eval mode, plus L2 term).
double evaluate_loss(const NeuralModel& model, const Corpus& corpus, double l2);

double review_macro_f1(const NeuralModel& model, const Corpus& corpus);

}  // namespace miltext
