#include "miltext/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "miltext/adadelta.hpp"
#include "miltext/checkpoint.hpp"
#include "miltext/evaluation.hpp"
#include "miltext/text.hpp"

namespace miltext {

using nlohmann::json;

// --- TfidfVectorizer -----------------------------------------------------------

TfidfVectorizer::TfidfVectorizer(int ngram_min, int ngram_max) : ngram_min_(ngram_min), ngram_max_(ngram_max) {
  if (ngram_min < 1 || ngram_max < ngram_min) throw Error("TfidfVectorizer: bad n-gram range");
}

std::vector<std::string> TfidfVectorizer::ngrams(const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  for (int n = ngram_min_; n <= ngram_max_; ++n) {
    if (static_cast<int>(tokens.size()) < n) break;
    for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
      std::string term = tokens[i];
      for (int j = 1; j < n; ++j) {
        term += ' ';
        term += tokens[i + static_cast<size_t>(j)];
      }
      out.push_back(std::move(term));
    }
  }
  return out;
}

void TfidfVectorizer::fit(const std::vector<std::vector<std::string>>& documents) {
  if (documents.empty()) throw Error("TfidfVectorizer::fit: no documents");
  term_index_.clear();
  terms_.clear();
  std::vector<long long> df;
  for (const auto& doc : documents) {
    std::set<std::string> seen;
    for (std::string& term : ngrams(doc)) seen.insert(std::move(term));
    for (const std::string& term : seen) {
      auto it = term_index_.find(term);
      if (it == term_index_.end()) {
        term_index_[term] = static_cast<int>(terms_.size());
        terms_.push_back(term);
        df.push_back(1);
      } else {
        ++df[static_cast<size_t>(it->second)];
      }
    }
  }
  double n = static_cast<double>(documents.size());
  idf_.resize(df.size());
  for (size_t i = 0; i < df.size(); ++i) idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  fitted_ = true;
}

SparseVec TfidfVectorizer::transform(const std::vector<std::string>& tokens) const {
  if (!fitted_) throw Error("TfidfVectorizer: transform before fit");
  std::unordered_map<int, double> counts;
  for (const std::string& term : ngrams(tokens)) {
    auto it = term_index_.find(term);
    if (it != term_index_.end()) counts[it->second] += 1.0;
  }
  SparseVec vec;
  vec.reserve(counts.size());
  for (const auto& [idx, count] : counts) vec.emplace_back(idx, count * idf_[static_cast<size_t>(idx)]);
  std::sort(vec.begin(), vec.end());
  double sq = 0.0;
  for (const auto& [idx, v] : vec) sq += v * v;
  if (sq > 0.0) {
    double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, v] : vec) v *= inv;
  }
  return vec;
}

double TfidfVectorizer::idf(const std::string& term) const {
  auto it = term_index_.find(term);
  if (it == term_index_.end()) throw Error("TfidfVectorizer: unknown term '" + term + "'");
  return idf_[static_cast<size_t>(it->second)];
}

std::string TfidfVectorizer::to_json_string() const {
  json j;
  j["ngram_min"] = ngram_min_;
  j["ngram_max"] = ngram_max_;
  j["terms"] = terms_;
  j["idf"] = idf_;
  return j.dump();
}

TfidfVectorizer TfidfVectorizer::from_json_string(const std::string& s) {
  json j = json::parse(s);
  TfidfVectorizer v(j.at("ngram_min").get<int>(), j.at("ngram_max").get<int>());
  v.terms_ = j.at("terms").get<std::vector<std::string>>();
  v.idf_ = j.at("idf").get<std::vector<double>>();
  for (size_t i = 0; i < v.terms_.size(); ++i) v.term_index_[v.terms_[i]] = static_cast<int>(i);
  v.fitted_ = true;
  return v;
}

// --- logistic regression ---------------------------------------------------------

std::vector<double> LogRegModel::predict_proba(const SparseVec& x) const {
  int classes = weights.dim(0);
  std::vector<double> logits(static_cast<size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    double acc = bias.values[static_cast<size_t>(c)];
    for (const auto& [idx, v] : x) acc += weights.at2(c, idx) * v;
    logits[static_cast<size_t>(c)] = acc;
  }
  double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

double logreg_loss(const LogRegModel& model, const std::vector<SparseVec>& features, const std::vector<int>& labels,
                   const std::vector<double>& sample_weights, double l2) {
  double total_weight = 0.0, total = 0.0;
  for (size_t i = 0; i < features.size(); ++i) {
    std::vector<double> p = model.predict_proba(features[i]);
    total += sample_weights[i] * -std::log(std::max(p[static_cast<size_t>(labels[i] - 1)], 1e-300));
    total_weight += sample_weights[i];
  }
  double loss = total / total_weight;
  for (double v : model.weights.values) loss += l2 * v * v;
  return loss;
}

LogRegModel train_logreg(const std::vector<SparseVec>& features, const std::vector<int>& labels,
                         const std::vector<double>& sample_weights, int num_classes, int dim,
                         const LogRegConfig& config) {
  if (features.empty() || features.size() != labels.size() || features.size() != sample_weights.size())
    throw Error("train_logreg: size mismatch between features, labels and weights");
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw Error("train_logreg: degenerate single-class training data");
  for (int y : labels)
    if (y < 1 || y > num_classes) throw Error("train_logreg: label " + std::to_string(y) + " out of range");
  double total_weight = 0.0;
  for (double w : sample_weights) total_weight += w;
  if (total_weight <= 0.0) throw Error("train_logreg: total sample weight is zero");

  ModelParams params;
  params.add("W", Tensor::zeros({num_classes, dim}));
  params.add("b", Tensor::zeros({num_classes}));

  AdadeltaConfig opt_cfg;
  opt_cfg.learning_rate = config.learning_rate;
  opt_cfg.rho = config.rho;
  opt_cfg.epsilon = config.epsilon;
  AdadeltaState optimizer(opt_cfg);

  // Adadelta hovers around the optimum instead of settling, so keep the
  // best-objective iterate seen.
  LogRegModel model;
  LogRegModel best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    model.weights = params.at("W").tensor;
    model.bias = params.at("b").tensor;

    GradMap grads;
    grads["W"] = Tensor::zeros({num_classes, dim});
    grads["b"] = Tensor::zeros({num_classes});
    Tensor& gw = grads["W"];
    Tensor& gb = grads["b"];
    double nll = 0.0;
    for (size_t i = 0; i < features.size(); ++i) {
      std::vector<double> p = model.predict_proba(features[i]);
      double w = sample_weights[i] / total_weight;
      nll += w * -std::log(std::max(p[static_cast<size_t>(labels[i] - 1)], 1e-300));
      for (int c = 0; c < num_classes; ++c) {
        double delta = w * (p[static_cast<size_t>(c)] - (labels[i] == c + 1 ? 1.0 : 0.0));
        gb.values[static_cast<size_t>(c)] += delta;
        for (const auto& [idx, v] : features[i]) gw.at2(c, idx) += delta * v;
      }
    }
    double loss = nll;
    for (size_t i = 0; i < gw.values.size(); ++i) {
      double wv = params.at("W").tensor.values[i];
      loss += config.l2 * wv * wv;
      gw.values[i] += 2.0 * config.l2 * wv;
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = model;
    }

    double norm = 0.0;
    for (double v : gw.values) norm += v * v;
    for (double v : gb.values) norm += v * v;
    if (std::sqrt(norm) < config.tol) break;
    optimizer.step(params, grads);
  }
  model.weights = params.at("W").tensor;
  model.bias = params.at("b").tensor;
  if (logreg_loss(model, features, labels, sample_weights, config.l2) <= best_loss) return model;
  return best;
}

// --- keyword classifiers ----------------------------------------------------------

KeywordRule kwrd1() { return KeywordRule{"KWRD1", {"food poisoning"}}; }
KeywordRule kwrd2() { return KeywordRule{"KWRD2", {"food poisoning", "sick", "vomit", "diarrhea"}}; }

namespace {

// Words a suffix rule would mangle even with the minimum-stem check.
const std::set<std::string>& strip_guard() {
  static const std::set<std::string> guard = {"this", "thus", "does", "goes", "les", "yes"};
  return guard;
}

std::string strip_suffix(const std::string& token) {
  if (strip_guard().count(token)) return token;
  for (const char* suffix : {"ing", "ed", "es", "s"}) {
    size_t len = std::char_traits<char>::length(suffix);
    if (token.size() >= len + 3 && token.compare(token.size() - len, len, suffix) == 0)
      return token.substr(0, token.size() - len);
  }
  return token;
}

}  // namespace

std::string normalize_for_keywords(const std::string& text) {
  std::string out;
  for (const std::string& token : tokenize(text)) {
    if (!out.empty()) out += ' ';
    out += strip_suffix(token);
  }
  return out;
}

bool kwrd_predict(const KeywordRule& rule, const std::string& text) {
  std::string haystack = " " + normalize_for_keywords(text) + " ";
  for (const std::string& term : rule.terms) {
    std::string needle = " " + normalize_for_keywords(term) + " ";
    if (haystack.find(needle) != std::string::npos) return true;
  }
  return false;
}

// --- LinearTextModel ------------------------------------------------------------

namespace {

std::vector<std::string> review_tokens(const Review& review) {
  std::vector<std::string> tokens;
  for (const Segment& s : review.segments) tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
  return tokens;
}

}  // namespace

SparseVec LinearTextModel::featurize(const std::vector<std::string>& tokens) const {
  if (kind_ == "rev-lr-bow") return tfidf_.transform(tokens);
  // average embedding, dense
  if (tokens.empty()) throw Error("LinearTextModel: empty token list");
  int dim = embeddings_.dim(1);
  std::vector<double> mean(static_cast<size_t>(dim), 0.0);
  for (const std::string& tok : tokens) {
    int row = vocab_.index(tok);
    for (int j = 0; j < dim; ++j) mean[static_cast<size_t>(j)] += embeddings_.at2(row, j);
  }
  SparseVec vec;
  vec.reserve(static_cast<size_t>(dim));
  for (int j = 0; j < dim; ++j) vec.emplace_back(j, mean[static_cast<size_t>(j)] / static_cast<double>(tokens.size()));
  return vec;
}

LinearTextModel LinearTextModel::train_rev_lr_emb(const Corpus& train, const Vocabulary& vocab,
                                                  const Tensor& embeddings, const LogRegConfig& config) {
  LinearTextModel m;
  m.kind_ = "rev-lr-emb";
  m.num_classes_ = train.num_classes;
  m.vocab_ = vocab;
  m.embeddings_ = embeddings;
  std::vector<SparseVec> xs;
  std::vector<int> ys;
  std::vector<double> ws;
  for (const Review& r : train.reviews) {
    xs.push_back(m.featurize(review_tokens(r)));
    ys.push_back(r.label);
    ws.push_back(r.sample_weight);
  }
  m.lr_ = train_logreg(xs, ys, ws, train.num_classes, embeddings.dim(1), config);
  return m;
}

LinearTextModel LinearTextModel::train_rev_lr_bow(const Corpus& train, const LogRegConfig& config) {
  LinearTextModel m;
  m.kind_ = "rev-lr-bow";
  m.num_classes_ = train.num_classes;
  std::vector<std::vector<std::string>> docs;
  for (const Review& r : train.reviews) docs.push_back(review_tokens(r));
  m.tfidf_ = TfidfVectorizer();
  m.tfidf_.fit(docs);
  std::vector<SparseVec> xs;
  std::vector<int> ys;
  std::vector<double> ws;
  for (size_t i = 0; i < train.reviews.size(); ++i) {
    xs.push_back(m.tfidf_.transform(docs[i]));
    ys.push_back(train.reviews[i].label);
    ws.push_back(train.reviews[i].sample_weight);
  }
  m.lr_ = train_logreg(xs, ys, ws, train.num_classes, m.tfidf_.dimension(), config);
  return m;
}

LinearTextModel LinearTextModel::train_seg_lr(const Corpus& segment_labeled, const Vocabulary& vocab,
                                              const Tensor& embeddings, const LogRegConfig& config) {
  LinearTextModel m;
  m.kind_ = "seg-lr";
  m.num_classes_ = segment_labeled.num_classes;
  m.vocab_ = vocab;
  m.embeddings_ = embeddings;
  std::vector<SparseVec> xs;
  std::vector<int> ys;
  std::vector<double> ws;
  for (const Review& r : segment_labeled.reviews)
    for (const Segment& s : r.segments) {
      if (!s.gold_label) throw Error("train_seg_lr: segment without gold label in review '" + r.id + "'");
      xs.push_back(m.featurize(s.tokens));
      ys.push_back(*s.gold_label);
      ws.push_back(r.sample_weight);
    }
  m.lr_ = train_logreg(xs, ys, ws, segment_labeled.num_classes, embeddings.dim(1), config);
  return m;
}

std::vector<double> LinearTextModel::predict_tokens(const std::vector<std::string>& tokens) const {
  return lr_.predict_proba(featurize(tokens));
}

ReviewPrediction LinearTextModel::forward_review(const Review& review) const {
  ReviewPrediction pred;
  pred.review_prob = predict_tokens(review_tokens(review));
  for (const Segment& s : review.segments) {
    pred.segment_probs.push_back(predict_tokens(s.tokens));
    pred.alpha.push_back(1.0);
    pred.scores.push_back(0.0);
  }
  return pred;
}

void LinearTextModel::save(const std::string& path) const {
  ModelParams params;
  params.add("W", lr_.weights);
  params.add("b", lr_.bias);
  if (kind_ != "rev-lr-bow") params.add("emb", embeddings_, /*trainable=*/false);
  save_params(path, params);

  json meta;
  meta["format_version"] = 1;
  meta["kind"] = kind_;
  meta["num_classes"] = num_classes_;
  if (kind_ == "rev-lr-bow") meta["tfidf"] = json::parse(tfidf_.to_json_string());
  else meta["vocab"] = vocab_.tokens();
  std::string tmp = path + ".meta.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw Error("LinearTextModel::save: cannot open '" + tmp + "'");
    os << meta.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), (path + ".meta.json").c_str()) != 0)
    throw Error("LinearTextModel::save: cannot rename sidecar for '" + path + "'");
}

LinearTextModel LinearTextModel::load(const std::string& path) {
  std::ifstream is(path + ".meta.json");
  if (!is) throw Error("LinearTextModel::load: missing sidecar '" + path + ".meta.json'");
  json meta = json::parse(is);
  LinearTextModel m;
  m.kind_ = meta.at("kind").get<std::string>();
  m.num_classes_ = meta.at("num_classes").get<int>();
  ModelParams params = load_params(path);
  m.lr_.weights = params.at("W").tensor;
  m.lr_.bias = params.at("b").tensor;
  if (m.kind_ == "rev-lr-bow") {
    m.tfidf_ = TfidfVectorizer::from_json_string(meta.at("tfidf").dump());
  } else {
    m.vocab_ = Vocabulary(meta.at("vocab").get<std::vector<std::string>>());
    m.embeddings_ = params.at("emb").tensor;
  }
  return m;
}

double seg_lr_cv_macro_f1(const Corpus& segment_labeled, const Vocabulary& vocab, const Tensor& embeddings, int folds,
                          const LogRegConfig& config) {
  std::vector<const Segment*> items;
  for (const Review& r : segment_labeled.reviews)
    for (const Segment& s : r.segments) {
      if (!s.gold_label) throw Error("seg_lr_cv_macro_f1: segment without gold label in review '" + r.id + "'");
      items.push_back(&s);
    }
  auto fold_index = make_folds(static_cast<int>(items.size()), folds);

  std::vector<int> classes(static_cast<size_t>(segment_labeled.num_classes));
  for (int c = 0; c < segment_labeled.num_classes; ++c) classes[static_cast<size_t>(c)] = c + 1;

  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    Corpus train_fold;
    train_fold.num_classes = segment_labeled.num_classes;
    Review holder;
    holder.id = "cv-train";
    holder.label = 1;
    std::vector<bool> held(items.size(), false);
    for (int idx : fold_index[static_cast<size_t>(f)]) held[static_cast<size_t>(idx)] = true;
    for (size_t i = 0; i < items.size(); ++i)
      if (!held[i]) holder.segments.push_back(*items[i]);
    train_fold.reviews.push_back(holder);

    LinearTextModel model = LinearTextModel::train_seg_lr(train_fold, vocab, embeddings, config);
    std::vector<int> pred, gold;
    for (int idx : fold_index[static_cast<size_t>(f)]) {
      pred.push_back(argmax_label(model.segment_prob(*items[static_cast<size_t>(idx)])));
      gold.push_back(*items[static_cast<size_t>(idx)]->gold_label);
    }
    total += macro_f1(pred, gold, classes);
  }
  return total / static_cast<double>(folds);
}

}  // namespace miltext
