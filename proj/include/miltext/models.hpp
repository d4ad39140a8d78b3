#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "miltext/corpus.hpp"
#include "miltext/encoders.hpp"
#include "miltext/tape.hpp"
#include "miltext/vocab.hpp"

namespace miltext {

enum class Aggregation { kUniform, kSoftmax, kSigmoid };

// Architecture configuration shared by the MIL variants and the
// non-hierarchical neural baselines. Defaults follow the reference
// configuration (k=300 embeddings, widths 3/4/5 with 100 maps each,
// 50-dim GRUs, 100-dim attention, dropout 0.5).
struct ModelSpec {
  std::string kind = "mil-sigmoid";  // mil-sigmoid|mil-softmax|mil-avg|rev-cnn|rev-rnn
  int num_classes = 2;
  int emb_dim = 300;
  std::vector<int> cnn_widths = {3, 4, 5};
  int cnn_feature_maps = 100;
  int gru_hidden = 50;
  int att_dim = 100;
  double dropout = 0.5;
  std::string activation = "relu";

  int enc_dim() const { return static_cast<int>(cnn_widths.size()) * cnn_feature_maps; }
  int ctx_dim() const { return 2 * gru_hidden; }
  bool is_mil() const { return kind.rfind("mil-", 0) == 0; }
  Aggregation aggregation() const;

  std::string to_json_string() const;
  static ModelSpec from_json_string(const std::string& s);
};

// Everything forward_review returns: the review distribution, per-segment
// distributions, attention weights and raw scores, and whether the
// aggregation had to fall back to the uniform average.
struct ReviewPrediction {
  std::vector<double> review_prob;
  std::vector<std::vector<double>> segment_probs;
  std::vector<double> alpha;
  std::vector<double> scores;
  bool aggregate_fallback = false;
};

struct SegmentCall {
  int label = 1;  // argmax, ties toward the lower class index
  double alpha = 0.0;
};

int argmax_label(const std::vector<double>& probs);
std::vector<SegmentCall> segment_calls(const ReviewPrediction& pred);

// --- milnet building blocks -------------------------------------------------
Ref classify_segment(Tape& t, Ref clf_w, Ref clf_b, Ref h);
Ref attention_score(Tape& t, const AttRefs& att, Ref h_ctx);
Ref softmax_weights(Tape& t, Ref scores);
Ref sigmoid_weights(Tape& t, Ref scores);

struct AggregateOut {
  Ref prob;
  bool fallback = false;
};
// Weighted average of segment distributions; weights below epsilon in total
// trigger the uniform-average fallback.
AggregateOut aggregate(Tape& t, Ref seg_probs, Ref alpha, double epsilon = 1e-8);

// --- trainable neural models ------------------------------------------------
class NeuralModel {
 public:
  virtual ~NeuralModel() = default;
  const ModelSpec& spec() const { return spec_; }
  const Vocabulary& vocab() const { return vocab_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  void set_params(ModelParams p) { params_ = std::move(p); }

  // Review-level probability node for the training loop. `refs` must come
  // from tape.params(params()).
  virtual Ref review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const = 0;

  // Eval-mode forward pass with all intermediates.
  virtual ReviewPrediction forward_review(const Review& review) const = 0;

  // Distribution for a single free-standing segment (the non-hierarchical
  // models run their full review pipeline on it).
  virtual std::vector<double> segment_prob(const Segment& segment) const = 0;

 protected:
  NeuralModel(ModelSpec spec, Vocabulary vocab) : spec_(std::move(spec)), vocab_(std::move(vocab)) {}
  ModelSpec spec_;
  Vocabulary vocab_;
  ModelParams params_;
};

// Hierarchical MIL model: CNN encoder per segment, softmax segment
// classifier, Bi-GRU + attention scores, and one of the three aggregators.
class MilModel : public NeuralModel {
 public:
  MilModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed);
  MilModel(ModelSpec spec, Vocabulary vocab, ModelParams params);

  Ref review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const override;
  ReviewPrediction forward_review(const Review& review) const override;
  std::vector<double> segment_prob(const Segment& segment) const override;

  // Padded variant used by batched training: positions >= the review's real
  // segment count are padding and get attention weight exactly 0.
  ReviewPrediction forward_review_padded(const Review& review, int pad_to) const;

 private:
  struct GraphOut {
    Ref review_prob;
    std::vector<Ref> seg_probs;
    Ref alpha;
    std::optional<Ref> scores;
    bool fallback = false;
  };
  GraphOut build(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const;
};

// Review-level CNN classifier; a test segment is classified by running the
// same pipeline on its tokens.
class RevCnnModel : public NeuralModel {
 public:
  RevCnnModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed);
  RevCnnModel(ModelSpec spec, Vocabulary vocab, ModelParams params);

  Ref review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const override;
  ReviewPrediction forward_review(const Review& review) const override;
  std::vector<double> segment_prob(const Segment& segment) const override;

 private:
  Ref tokens_prob_graph(Tape& t, const RefMap& refs, const std::vector<int>& ids, Mode mode, Rng& rng) const;
};

// Review-level word Bi-GRU with softmax attention over positions.
class RevRnnModel : public NeuralModel {
 public:
  RevRnnModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed);
  RevRnnModel(ModelSpec spec, Vocabulary vocab, ModelParams params);

  Ref review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const override;
  ReviewPrediction forward_review(const Review& review) const override;
  std::vector<double> segment_prob(const Segment& segment) const override;

 private:
  Ref tokens_prob_graph(Tape& t, const RefMap& refs, const std::vector<int>& ids, Mode mode, Rng& rng) const;
};

// Factory for a freshly initialized model of the given kind.
std::unique_ptr<NeuralModel> make_neural_model(const ModelSpec& spec, const Vocabulary& vocab,
                                               const Tensor& embeddings, std::uint64_t seed);

// Checkpoint = binary parameter container + JSON sidecar (model spec,
// vocabulary and its fingerprint). `path` is the parameter file; the sidecar
// lives at path + ".meta.json".
void save_model(const std::string& path, const NeuralModel& model);
std::unique_ptr<NeuralModel> load_model(const std::string& path);

std::vector<int> all_review_token_ids(const Vocabulary& vocab, const Review& review);

}  // namespace miltext
