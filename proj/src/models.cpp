#include "miltext/models.hpp"

#include <fstream>

#include <json.hpp>

#include "miltext/checkpoint.hpp"

namespace miltext {

using nlohmann::json;

Aggregation ModelSpec::aggregation() const {
  if (kind == "mil-avg") return Aggregation::kUniform;
  if (kind == "mil-softmax") return Aggregation::kSoftmax;
  if (kind == "mil-sigmoid") return Aggregation::kSigmoid;
  throw Error("ModelSpec: '" + kind + "' has no aggregation function");
}

std::string ModelSpec::to_json_string() const {
  json j;
  j["kind"] = kind;
  j["num_classes"] = num_classes;
  j["emb_dim"] = emb_dim;
  j["cnn_widths"] = cnn_widths;
  j["cnn_feature_maps"] = cnn_feature_maps;
  j["gru_hidden"] = gru_hidden;
  j["att_dim"] = att_dim;
  j["dropout"] = dropout;
  j["activation"] = activation;
  return j.dump();
}

ModelSpec ModelSpec::from_json_string(const std::string& s) {
  json j = json::parse(s);
  ModelSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.emb_dim = j.at("emb_dim").get<int>();
  spec.cnn_widths = j.at("cnn_widths").get<std::vector<int>>();
  spec.cnn_feature_maps = j.at("cnn_feature_maps").get<int>();
  spec.gru_hidden = j.at("gru_hidden").get<int>();
  spec.att_dim = j.at("att_dim").get<int>();
  spec.dropout = j.at("dropout").get<double>();
  spec.activation = j.at("activation").get<std::string>();
  return spec;
}

int argmax_label(const std::vector<double>& probs) {
  int best = 0;
  for (size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best + 1;  // 1-based labels; ties keep the lower index
}

std::vector<SegmentCall> segment_calls(const ReviewPrediction& pred) {
  std::vector<SegmentCall> calls;
  calls.reserve(pred.segment_probs.size());
  for (size_t i = 0; i < pred.segment_probs.size(); ++i)
    calls.push_back(SegmentCall{argmax_label(pred.segment_probs[i]), pred.alpha[i]});
  return calls;
}

// --- milnet building blocks -------------------------------------------------

Ref classify_segment(Tape& t, Ref clf_w, Ref clf_b, Ref h) {
  return t.softmax_last(t.add(t.matmul(clf_w, h), clf_b));
}

Ref attention_score(Tape& t, const AttRefs& att, Ref h_ctx) {
  return t.matmul(att.u, t.tanh(t.add(t.matmul(att.w, h_ctx), att.b)));
}

Ref softmax_weights(Tape& t, Ref scores) { return t.softmax_last(scores); }

Ref sigmoid_weights(Tape& t, Ref scores) { return t.sigmoid(scores); }

AggregateOut aggregate(Tape& t, Ref seg_probs, Ref alpha, double epsilon) {
  const Tensor& p = seg_probs.val();
  const Tensor& a = alpha.val();
  if (p.ndim() != 2 || a.ndim() != 1 || p.dim(0) != a.dim(0)) {
    throw Error("aggregate: shape mismatch " + p.shape_str() + " vs " + a.shape_str());
  }
  double total = 0.0;
  for (double v : a.values) total += v;
  if (total < epsilon) return AggregateOut{t.mean_rows(seg_probs), true};
  Ref inv_total = t.exp(t.scale(t.log(t.sum(alpha)), -1.0));
  return AggregateOut{t.scale_by(t.matmul(alpha, seg_probs), inv_total), false};
}

// --- shared helpers ----------------------------------------------------------

std::vector<int> all_review_token_ids(const Vocabulary& vocab, const Review& review) {
  std::vector<int> ids;
  for (const Segment& s : review.segments) {
    std::vector<int> seg = vocab.ids(s.tokens);
    ids.insert(ids.end(), seg.begin(), seg.end());
  }
  if (ids.empty()) throw Error("review '" + review.id + "' has no tokens");
  return ids;
}

namespace {

std::vector<double> tensor_to_vec(const Tensor& t) { return t.values; }

Review segment_as_review(const Segment& segment) {
  Review r;
  r.id = "segment";
  r.label = 1;
  r.segments.push_back(segment);
  return r;
}

void check_review(const Review& review) {
  if (review.segments.empty()) throw Error("review '" + review.id + "' has no segments");
}

}  // namespace

// --- MilModel ----------------------------------------------------------------

MilModel::MilModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  if (!spec_.is_mil()) throw Error("MilModel: kind '" + spec_.kind + "' is not a MIL model");
  if (embeddings.ndim() != 2 || embeddings.dim(0) != vocab_.size() || embeddings.dim(1) != spec_.emb_dim)
    throw Error("MilModel: embedding table " + embeddings.shape_str() + " does not match vocab/emb_dim");
  Rng rng(Rng::mix(seed, 0x9d1f));
  params_.add("emb", embeddings);
  add_cnn_params(params_, "cnn", spec_.cnn_widths, spec_.cnn_feature_maps, spec_.emb_dim, rng);
  add_linear_params(params_, "clf", spec_.num_classes, spec_.enc_dim(), rng);
  if (spec_.aggregation() != Aggregation::kUniform) {
    add_gru_params(params_, "gru.fw", spec_.enc_dim(), spec_.gru_hidden, rng);
    add_gru_params(params_, "gru.bw", spec_.enc_dim(), spec_.gru_hidden, rng);
    add_attention_params(params_, "att", spec_.att_dim, spec_.ctx_dim(), rng);
  }
}

MilModel::MilModel(ModelSpec spec, Vocabulary vocab, ModelParams params)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  params_ = std::move(params);
}

MilModel::GraphOut MilModel::build(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const {
  check_review(review);
  CnnRefs cnn = cnn_refs(refs, "cnn", spec_.cnn_widths);
  Ref emb = refs.at("emb");
  Ref clf_w = refs.at("clf.W");
  Ref clf_b = refs.at("clf.b");

  std::vector<Ref> enc;
  std::vector<Ref> probs;
  for (const Segment& s : review.segments) {
    Ref h = encode_cnn(t, emb, cnn, vocab_.ids(s.tokens), spec_.activation, spec_.dropout, mode, rng);
    enc.push_back(h);
    probs.push_back(classify_segment(t, clf_w, clf_b, h));
  }
  Ref stacked = t.vstack(probs);

  GraphOut out;
  out.seg_probs = probs;
  int m = static_cast<int>(review.segments.size());
  switch (spec_.aggregation()) {
    case Aggregation::kUniform:
      out.alpha = t.leaf(Tensor::filled({m}, 1.0 / m));
      break;
    case Aggregation::kSoftmax:
    case Aggregation::kSigmoid: {
      std::vector<Ref> ctx = bigru_context(t, gru_refs(refs, "gru.fw"), gru_refs(refs, "gru.bw"), enc,
                                           spec_.gru_hidden, spec_.dropout, mode, rng);
      AttRefs att = attention_refs(refs, "att");
      std::vector<Ref> scores;
      scores.reserve(ctx.size());
      for (Ref c : ctx) scores.push_back(attention_score(t, att, c));
      Ref e = t.concat(scores);
      out.scores = e;
      out.alpha = spec_.aggregation() == Aggregation::kSoftmax ? softmax_weights(t, e) : sigmoid_weights(t, e);
      break;
    }
  }
  AggregateOut agg = aggregate(t, stacked, out.alpha);
  out.review_prob = agg.prob;
  out.fallback = agg.fallback;
  return out;
}

Ref MilModel::review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const {
  return build(t, refs, review, mode, rng).review_prob;
}

ReviewPrediction MilModel::forward_review(const Review& review) const {
  return forward_review_padded(review, 0);
}

ReviewPrediction MilModel::forward_review_padded(const Review& review, int pad_to) const {
  check_review(review);
  Tape t;
  RefMap refs = t.params(params_);
  Rng rng(0);  // eval mode consumes no randomness
  GraphOut g = build(t, refs, review, Mode::kEval, rng);

  ReviewPrediction pred;
  pred.review_prob = tensor_to_vec(g.review_prob.val());
  for (Ref p : g.seg_probs) pred.segment_probs.push_back(tensor_to_vec(p.val()));
  pred.alpha = tensor_to_vec(g.alpha.val());
  pred.scores = g.scores ? tensor_to_vec(g.scores->val()) : std::vector<double>(pred.alpha.size(), 0.0);
  pred.aggregate_fallback = g.fallback;

  // Padding positions: excluded from encoding and aggregation, attention
  // weight exactly zero.
  int m = static_cast<int>(review.segments.size());
  for (int i = m; i < pad_to; ++i) {
    pred.segment_probs.emplace_back(static_cast<size_t>(spec_.num_classes), 1.0 / spec_.num_classes);
    pred.alpha.push_back(0.0);
    pred.scores.push_back(0.0);
  }
  return pred;
}

std::vector<double> MilModel::segment_prob(const Segment& segment) const {
  return forward_review(segment_as_review(segment)).segment_probs.at(0);
}

// --- RevCnnModel ---------------------------------------------------------------

RevCnnModel::RevCnnModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  if (spec_.kind != "rev-cnn") throw Error("RevCnnModel: unexpected kind '" + spec_.kind + "'");
  if (embeddings.ndim() != 2 || embeddings.dim(0) != vocab_.size() || embeddings.dim(1) != spec_.emb_dim)
    throw Error("RevCnnModel: embedding table " + embeddings.shape_str() + " does not match vocab/emb_dim");
  Rng rng(Rng::mix(seed, 0x9d2f));
  params_.add("emb", embeddings);
  add_cnn_params(params_, "cnn", spec_.cnn_widths, spec_.cnn_feature_maps, spec_.emb_dim, rng);
  add_linear_params(params_, "clf", spec_.num_classes, spec_.enc_dim(), rng);
}

RevCnnModel::RevCnnModel(ModelSpec spec, Vocabulary vocab, ModelParams params)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  params_ = std::move(params);
}

Ref RevCnnModel::tokens_prob_graph(Tape& t, const RefMap& refs, const std::vector<int>& ids, Mode mode,
                                   Rng& rng) const {
  Ref h = encode_cnn(t, refs.at("emb"), cnn_refs(refs, "cnn", spec_.cnn_widths), ids, spec_.activation, spec_.dropout,
                     mode, rng);
  return classify_segment(t, refs.at("clf.W"), refs.at("clf.b"), h);
}

Ref RevCnnModel::review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const {
  return tokens_prob_graph(t, refs, all_review_token_ids(vocab_, review), mode, rng);
}

ReviewPrediction RevCnnModel::forward_review(const Review& review) const {
  check_review(review);
  Tape t;
  RefMap refs = t.params(params_);
  Rng rng(0);
  ReviewPrediction pred;
  pred.review_prob = tensor_to_vec(review_prob_graph(t, refs, review, Mode::kEval, rng).val());
  for (const Segment& s : review.segments) {
    pred.segment_probs.push_back(segment_prob(s));
    pred.alpha.push_back(1.0);  // no attention; gate stays open
    pred.scores.push_back(0.0);
  }
  return pred;
}

std::vector<double> RevCnnModel::segment_prob(const Segment& segment) const {
  Tape t;
  RefMap refs = t.params(params_);
  Rng rng(0);
  return tensor_to_vec(tokens_prob_graph(t, refs, vocab_.ids(segment.tokens), Mode::kEval, rng).val());
}

// --- RevRnnModel ---------------------------------------------------------------

RevRnnModel::RevRnnModel(ModelSpec spec, Vocabulary vocab, const Tensor& embeddings, std::uint64_t seed)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  if (spec_.kind != "rev-rnn") throw Error("RevRnnModel: unexpected kind '" + spec_.kind + "'");
  if (embeddings.ndim() != 2 || embeddings.dim(0) != vocab_.size() || embeddings.dim(1) != spec_.emb_dim)
    throw Error("RevRnnModel: embedding table " + embeddings.shape_str() + " does not match vocab/emb_dim");
  Rng rng(Rng::mix(seed, 0x9d3f));
  params_.add("emb", embeddings);
  add_gru_params(params_, "gru.fw", spec_.emb_dim, spec_.gru_hidden, rng);
  add_gru_params(params_, "gru.bw", spec_.emb_dim, spec_.gru_hidden, rng);
  add_attention_params(params_, "att", spec_.att_dim, spec_.ctx_dim(), rng);
  add_linear_params(params_, "clf", spec_.num_classes, spec_.ctx_dim(), rng);
}

RevRnnModel::RevRnnModel(ModelSpec spec, Vocabulary vocab, ModelParams params)
    : NeuralModel(std::move(spec), std::move(vocab)) {
  params_ = std::move(params);
}

Ref RevRnnModel::tokens_prob_graph(Tape& t, const RefMap& refs, const std::vector<int>& ids, Mode mode,
                                   Rng& rng) const {
  Ref emb = t.embedding_rows(refs.at("emb"), ids);
  if (mode == Mode::kTrain && spec_.dropout > 0.0) emb = t.dropout(emb, spec_.dropout, rng);
  std::vector<Ref> inputs;
  inputs.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) inputs.push_back(t.row(emb, static_cast<int>(i)));
  std::vector<Ref> ctx =
      bigru_context(t, gru_refs(refs, "gru.fw"), gru_refs(refs, "gru.bw"), inputs, spec_.gru_hidden, spec_.dropout,
                    mode, rng);
  AttRefs att = attention_refs(refs, "att");
  std::vector<Ref> scores;
  scores.reserve(ctx.size());
  for (Ref c : ctx) scores.push_back(attention_score(t, att, c));
  Ref alpha = softmax_weights(t, t.concat(scores));
  Ref attended = t.matmul(alpha, t.vstack(ctx));
  return classify_segment(t, refs.at("clf.W"), refs.at("clf.b"), attended);
}

Ref RevRnnModel::review_prob_graph(Tape& t, const RefMap& refs, const Review& review, Mode mode, Rng& rng) const {
  return tokens_prob_graph(t, refs, all_review_token_ids(vocab_, review), mode, rng);
}

ReviewPrediction RevRnnModel::forward_review(const Review& review) const {
  check_review(review);
  Tape t;
  RefMap refs = t.params(params_);
  Rng rng(0);
  ReviewPrediction pred;
  pred.review_prob = tensor_to_vec(review_prob_graph(t, refs, review, Mode::kEval, rng).val());
  for (const Segment& s : review.segments) {
    pred.segment_probs.push_back(segment_prob(s));
    pred.alpha.push_back(1.0);
    pred.scores.push_back(0.0);
  }
  return pred;
}

std::vector<double> RevRnnModel::segment_prob(const Segment& segment) const {
  Tape t;
  RefMap refs = t.params(params_);
  Rng rng(0);
  return tensor_to_vec(tokens_prob_graph(t, refs, vocab_.ids(segment.tokens), Mode::kEval, rng).val());
}

// --- factory and checkpoints ---------------------------------------------------

std::unique_ptr<NeuralModel> make_neural_model(const ModelSpec& spec, const Vocabulary& vocab,
                                               const Tensor& embeddings, std::uint64_t seed) {
  if (spec.is_mil()) return std::make_unique<MilModel>(spec, vocab, embeddings, seed);
  if (spec.kind == "rev-cnn") return std::make_unique<RevCnnModel>(spec, vocab, embeddings, seed);
  if (spec.kind == "rev-rnn") return std::make_unique<RevRnnModel>(spec, vocab, embeddings, seed);
  throw Error("make_neural_model: unknown kind '" + spec.kind + "'");
}

void save_model(const std::string& path, const NeuralModel& model) {
  save_params(path, model.params());
  json meta;
  meta["format_version"] = 1;
  meta["spec"] = json::parse(model.spec().to_json_string());
  meta["vocab"] = model.vocab().tokens();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(model.vocab().fingerprint()));
  meta["vocab_fingerprint"] = std::string(buf);
  std::string tmp = path + ".meta.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw Error("save_model: cannot open '" + tmp + "'");
    os << meta.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), (path + ".meta.json").c_str()) != 0)
    throw Error("save_model: cannot rename sidecar for '" + path + "'");
}

std::unique_ptr<NeuralModel> load_model(const std::string& path) {
  std::ifstream is(path + ".meta.json");
  if (!is) throw Error("load_model: missing sidecar '" + path + ".meta.json'");
  json meta = json::parse(is);
  if (meta.at("format_version").get<int>() != 1) throw Error("load_model: unsupported sidecar version");
  ModelSpec spec = ModelSpec::from_json_string(meta.at("spec").dump());
  Vocabulary vocab(meta.at("vocab").get<std::vector<std::string>>());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(vocab.fingerprint()));
  if (meta.at("vocab_fingerprint").get<std::string>() != buf)
    throw Error("load_model: vocabulary fingerprint mismatch in '" + path + ".meta.json'");
  ModelParams params = load_params(path);

  if (spec.is_mil()) return std::make_unique<MilModel>(spec, vocab, std::move(params));
  if (spec.kind == "rev-cnn") return std::make_unique<RevCnnModel>(spec, vocab, std::move(params));
  if (spec.kind == "rev-rnn") return std::make_unique<RevRnnModel>(spec, vocab, std::move(params));
  throw Error("load_model: unknown kind '" + spec.kind + "'");
}

}  // namespace miltext
