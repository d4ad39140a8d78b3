#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "miltext/corpus.hpp"
#include "miltext/models.hpp"
#include "miltext/vocab.hpp"

namespace miltext {

using SparseVec = std::vector<std::pair<int, double>>;  // (index, value), indices ascending

// Bag-of-n-grams with smoothed IDF = ln((1+N)/(1+df)) + 1 and L2-normalized
// output vectors. Fit on the training split only.
class TfidfVectorizer {
 public:
  explicit TfidfVectorizer(int ngram_min = 1, int ngram_max = 3);

  void fit(const std::vector<std::vector<std::string>>& documents);
  SparseVec transform(const std::vector<std::string>& tokens) const;  // unseen n-grams are ignored

  bool fitted() const { return fitted_; }
  int dimension() const { return static_cast<int>(idf_.size()); }
  double idf(const std::string& term) const;

  std::string to_json_string() const;
  static TfidfVectorizer from_json_string(const std::string& s);

 private:
  std::vector<std::string> ngrams(const std::vector<std::string>& tokens) const;
  int ngram_min_;
  int ngram_max_;
  std::unordered_map<std::string, int> term_index_;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  bool fitted_ = false;
};

struct LogRegConfig {
  double l2 = 1e-4;
  int max_iters = 3000;
  double tol = 1e-5;          // stop when the gradient norm drops below this
  double learning_rate = 1.0;  // Adadelta rate; the optimizer self-scales
  double rho = 0.95;
  double epsilon = 1e-10;  // finer RMS floor than the neural nets; the convex
                           // objective needs the small-step regime near the optimum
};

struct LogRegModel {
  Tensor weights;  // {C, D}
  Tensor bias;     // {C}
  std::vector<double> predict_proba(const SparseVec& x) const;
};

// Multinomial logistic regression by sample-weighted NLL + L2, fitted with
// the shared Adadelta optimizer on analytic full-batch gradients.
LogRegModel train_logreg(const std::vector<SparseVec>& features, const std::vector<int>& labels,
                         const std::vector<double>& sample_weights, int num_classes, int dim,
                         const LogRegConfig& config = {});

// Objective value; also used to cross-check against an independent optimizer.
double logreg_loss(const LogRegModel& model, const std::vector<SparseVec>& features, const std::vector<int>& labels,
                   const std::vector<double>& sample_weights, double l2);

// --- keyword classifiers ------------------------------------------------------

struct KeywordRule {
  std::string id;
  std::vector<std::string> terms;
};

KeywordRule kwrd1();  // {"food poisoning"}
KeywordRule kwrd2();  // {"food poisoning", "sick", "vomit", "diarrhea"}

// Lowercases, tokenizes and strips s/es/ed/ing suffixes (minimum stem of
// three characters, small guard list); returns the space-joined tokens.
std::string normalize_for_keywords(const std::string& text);

// True ("Sick") if any normalized term occurs in the normalized text.
bool kwrd_predict(const KeywordRule& rule, const std::string& text);

// --- logistic-regression text models -------------------------------------------

// Rev-LR-EMB / Rev-LR-BoW / Seg-LR: a fixed featurizer plus a trained
// logistic regression. Review-level models are applied to a test segment by
// running the same pipeline on the segment text.
class LinearTextModel {
 public:
  static LinearTextModel train_rev_lr_emb(const Corpus& train, const Vocabulary& vocab, const Tensor& embeddings,
                                          const LogRegConfig& config = {});
  static LinearTextModel train_rev_lr_bow(const Corpus& train, const LogRegConfig& config = {});
  // Requires gold labels on every segment (fully supervised reference).
  static LinearTextModel train_seg_lr(const Corpus& segment_labeled, const Vocabulary& vocab,
                                      const Tensor& embeddings, const LogRegConfig& config = {});

  const std::string& kind() const { return kind_; }
  int num_classes() const { return num_classes_; }

  std::vector<double> predict_tokens(const std::vector<std::string>& tokens) const;
  std::vector<double> segment_prob(const Segment& segment) const { return predict_tokens(segment.tokens); }
  ReviewPrediction forward_review(const Review& review) const;

  void save(const std::string& path) const;           // params + .meta.json sidecar
  static LinearTextModel load(const std::string& path);

 private:
  LinearTextModel() = default;
  SparseVec featurize(const std::vector<std::string>& tokens) const;

  std::string kind_;
  int num_classes_ = 2;
  LogRegModel lr_;
  TfidfVectorizer tfidf_;
  Vocabulary vocab_;
  Tensor embeddings_;  // frozen pretrained rows for the avg-embedding features
};

// Mean held-out macro-F1 of Seg-LR over a round-robin fold split.
double seg_lr_cv_macro_f1(const Corpus& segment_labeled, const Vocabulary& vocab, const Tensor& embeddings,
                          int folds = 10, const LogRegConfig& config = {});

}  // namespace miltext
