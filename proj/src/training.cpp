#include "miltext/training.hpp"

#include <algorithm>
#include <cmath>

#include "miltext/evaluation.hpp"

namespace miltext {

BatchPlan make_batches(const Corpus& corpus, int batch_size, std::uint64_t seed) {
  if (corpus.reviews.empty()) throw Error("make_batches: empty corpus");
  if (batch_size < 1) throw Error("make_batches: batch size must be positive");

  std::vector<int> order(corpus.reviews.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return corpus.reviews[static_cast<size_t>(a)].segments.size() < corpus.reviews[static_cast<size_t>(b)].segments.size();
  });

  BatchPlan plan;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    Batch b;
    size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
    for (size_t i = start; i < end; ++i) {
      b.review_indices.push_back(order[i]);
      b.max_segments = std::max(b.max_segments,
                                static_cast<int>(corpus.reviews[static_cast<size_t>(order[i])].segments.size()));
    }
    plan.batches.push_back(std::move(b));
  }

  plan.order.resize(plan.batches.size());
  for (size_t i = 0; i < plan.order.size(); ++i) plan.order[i] = static_cast<int>(i);
  Rng rng(Rng::mix(seed, 0xba7c4));
  rng.shuffle(plan.order);
  return plan;
}

double nll_value(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
                 const std::vector<double>& weights) {
  if (probs.size() != labels.size() || probs.size() != weights.size())
    throw Error("nll_value: size mismatch between predictions, labels and weights");
  double total_weight = 0.0, total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    int y = labels[i];
    if (y < 1 || y > static_cast<int>(probs[i].size()))
      throw Error("nll_value: label " + std::to_string(y) + " outside [1.." + std::to_string(probs[i].size()) + "]");
    total_weight += weights[i];
    total += weights[i] * -std::log(std::max(probs[i][static_cast<size_t>(y - 1)], 1e-300));
  }
  if (total_weight <= 0.0) throw Error("nll_value: total sample weight is zero");
  return total / total_weight;
}

Ref nll_loss_graph(Tape& t, const std::vector<Ref>& review_probs, const std::vector<int>& labels,
                   const std::vector<double>& weights, Ref clf_w, double l2) {
  if (review_probs.size() != labels.size() || review_probs.size() != weights.size())
    throw Error("nll_loss_graph: size mismatch between predictions, labels and weights");
  double total_weight = 0.0;
  for (double w : weights) total_weight += w;
  if (total_weight <= 0.0) throw Error("nll_loss_graph: total sample weight is zero");

  std::vector<Ref> terms;
  terms.reserve(review_probs.size());
  for (size_t i = 0; i < review_probs.size(); ++i) {
    const Tensor& p = review_probs[i].val();
    int classes = static_cast<int>(p.numel());
    int y = labels[i];
    if (y < 1 || y > classes)
      throw Error("nll_loss_graph: label " + std::to_string(y) + " outside [1.." + std::to_string(classes) + "]");
    Tensor onehot = Tensor::zeros({classes});
    onehot.values[static_cast<size_t>(y - 1)] = 1.0;
    Ref picked = t.masked_sum(review_probs[i], std::move(onehot));
    terms.push_back(t.scale(t.log(picked), -weights[i] / total_weight));
  }
  Ref loss = t.sum(t.concat(terms));
  if (l2 > 0.0) loss = t.add(loss, t.scale(t.sum(t.mul(clf_w, clf_w)), l2));
  return loss;
}

double evaluate_loss(const NeuralModel& model, const Corpus& corpus, double l2) {
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  std::vector<double> weights;
  probs.reserve(corpus.reviews.size());
  for (const Review& r : corpus.reviews) {
    probs.push_back(model.forward_review(r).review_prob);
    labels.push_back(r.label);
    weights.push_back(r.sample_weight);
  }
  double loss = nll_value(probs, labels, weights);
  if (l2 > 0.0) {
    const Tensor& w = model.params().at("clf.W").tensor;
    double sq = 0.0;
    for (double v : w.values) sq += v * v;
    loss += l2 * sq;
  }
  return loss;
}

double review_macro_f1(const NeuralModel& model, const Corpus& corpus) {
  std::vector<int> pred, gold;
  pred.reserve(corpus.reviews.size());
  for (const Review& r : corpus.reviews) {
    pred.push_back(argmax_label(model.forward_review(r).review_prob));
    gold.push_back(r.label);
  }
  std::vector<int> classes(static_cast<size_t>(corpus.num_classes));
  for (int c = 0; c < corpus.num_classes; ++c) classes[static_cast<size_t>(c)] = c + 1;
  return macro_f1(pred, gold, classes);
}

TrainResult train(NeuralModel& model, const Corpus& train_split, const Corpus& val_split, const TrainConfig& config) {
  if (train_split.num_classes != val_split.num_classes)
    throw Error("train: training and validation splits disagree on the number of classes");
  if (config.patience >= config.max_epochs) throw Error("train: patience must be below max_epochs");

  AdadeltaConfig opt_cfg;
  opt_cfg.learning_rate = config.learning_rate;
  opt_cfg.rho = config.rho;
  opt_cfg.epsilon = config.epsilon;
  opt_cfg.clip_norm = config.clip_norm;
  AdadeltaState optimizer(opt_cfg);

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  Rng dropout_rng(Rng::mix(config.seed, 0xd70b));

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    BatchPlan plan = make_batches(train_split, config.batch_size, Rng::mix(config.seed, static_cast<std::uint64_t>(epoch)));

    double epoch_loss = 0.0, epoch_weight = 0.0;
    for (int batch_id : plan.order) {
      const Batch& batch = plan.batches[static_cast<size_t>(batch_id)];
      Tape tape;
      RefMap refs = tape.params(model.params());
      std::vector<Ref> probs;
      std::vector<int> labels;
      std::vector<double> weights;
      double batch_weight = 0.0;
      for (int idx : batch.review_indices) {
        const Review& r = train_split.reviews[static_cast<size_t>(idx)];
        probs.push_back(model.review_prob_graph(tape, refs, r, Mode::kTrain, dropout_rng));
        labels.push_back(r.label);
        weights.push_back(r.sample_weight);
        batch_weight += r.sample_weight;
      }
      if (batch_weight <= 0.0) continue;  // all-zero-weight batch contributes nothing
      Ref loss = nll_loss_graph(tape, probs, labels, weights, refs.at("clf.W"), config.l2);
      double loss_value = loss.val().item();
      if (!std::isfinite(loss_value))
        throw Error("train: loss diverged (NaN/Inf) at epoch " + std::to_string(epoch) +
                    "; last train loss " + std::to_string(epoch_loss / std::max(epoch_weight, 1e-12)));
      epoch_loss += loss_value * batch_weight;
      epoch_weight += batch_weight;
      GradMap grads = tape.backward(loss, model.params());
      optimizer.step(model.params(), grads);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0;
    stats.val_loss = evaluate_loss(model, val_split, config.l2);
    stats.val_macro_f1 = review_macro_f1(model, val_split);
    if (!std::isfinite(stats.val_loss)) throw Error("train: validation loss diverged at epoch " + std::to_string(epoch));
    result.log.push_back(stats);

    if (stats.val_loss < result.best_val_loss) {
      result.best_val_loss = stats.val_loss;
      result.best_epoch = epoch;
      result.best_params = model.params();
    } else if (epoch - result.best_epoch > config.patience) {
      break;
    }
  }

  model.set_params(result.best_params);
  return result;
}

}  // namespace miltext
