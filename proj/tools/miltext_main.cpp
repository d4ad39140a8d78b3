// miltext: weakly supervised segment-level review classification.
// Subcommands: synth | train | eval | highlight | stats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "miltext/baselines.hpp"
#include "miltext/checkpoint.hpp"
#include "miltext/corpus.hpp"
#include "miltext/evaluation.hpp"
#include "miltext/highlight.hpp"
#include "miltext/models.hpp"
#include "miltext/synthetic.hpp"
#include "miltext/training.hpp"
#include "miltext/vocab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace miltext;

namespace {

const std::vector<std::string> kModelNames = {"mil-sigmoid", "mil-softmax", "mil-avg",    "rev-cnn",
                                              "rev-rnn",     "rev-lr-emb",  "rev-lr-bow", "seg-lr"};

void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc | std::ios::binary);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os << content;
    if (!os) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

// Every resolved option of the parsed subcommand, as strings.
json collect_config(const CLI::App* cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_lnames().empty()) continue;
    std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (!opt->results().empty()) {
      if (opt->results().size() == 1) cfg[name] = opt->results()[0];
      else cfg[name] = opt->results();
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["format_version"] = 1;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["outputs"] = outputs;
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

json stats_to_json(const std::map<int, ClassStats>& stats) {
  json out = json::object();
  for (const auto& [label, cs] : stats) {
    json entry;
    entry["reviews"] = cs.reviews;
    entry["segment_share"] = cs.segment_share;
    entry["witness"] = cs.witness;
    entry["wr"] = cs.wr;
    out[std::to_string(label)] = std::move(entry);
  }
  return out;
}

// --- checkpoint dispatch -------------------------------------------------------

struct LoadedModel {
  std::unique_ptr<NeuralModel> neural;
  std::unique_ptr<LinearTextModel> linear;

  std::string kind() const { return neural ? neural->spec().kind : linear->kind(); }
  int num_classes() const { return neural ? neural->spec().num_classes : linear->num_classes(); }
  bool is_mil() const { return neural && neural->spec().is_mil(); }
  ReviewPrediction forward_review(const Review& r) const {
    return neural ? neural->forward_review(r) : linear->forward_review(r);
  }
};

LoadedModel load_any_model(const std::string& path) {
  std::ifstream is(path + ".meta.json");
  if (!is) throw Error("missing checkpoint sidecar '" + path + ".meta.json'");
  json meta = json::parse(is);
  LoadedModel out;
  if (meta.contains("spec")) {
    out.neural = load_model(path);
  } else {
    out.linear = std::make_unique<LinearTextModel>(LinearTextModel::load(path));
  }
  return out;
}

// --- synth ----------------------------------------------------------------------

struct SynthCmd {
  std::string out;
  SyntheticSpec spec;
};

int run_synth(const SynthCmd& o, const json& cfg) {
  fs::create_directories(o.out);
  SyntheticCorpus corpus = generate_synthetic(o.spec);
  save_corpus((fs::path(o.out) / "train.jsonl").string(), corpus.train);
  save_corpus((fs::path(o.out) / "val.jsonl").string(), corpus.val);
  save_corpus((fs::path(o.out) / "test.jsonl").string(), corpus.test);
  json stats = stats_to_json(corpus_stats(corpus.test));
  write_text_atomic(fs::path(o.out) / "stats.json", stats.dump(2) + "\n");
  write_manifest(o.out, "synth", cfg, {"train.jsonl", "val.jsonl", "test.jsonl", "stats.json"});
  std::cout << "synth: wrote " << corpus.train.reviews.size() << "/" << corpus.val.reviews.size() << "/"
            << corpus.test.reviews.size() << " reviews to " << o.out << "\n";
  return 0;
}

// --- train ----------------------------------------------------------------------

struct TrainCmd {
  std::string out;
  std::string model = "mil-sigmoid";
  std::string agg;
  std::string train_path;
  std::string val_path;
  std::string embeddings_path;
  int classes = 2;
  ModelSpec spec;
  TrainConfig train_cfg;
  LogRegConfig lr_cfg;
};

std::string effective_model(const TrainCmd& o) {
  if (o.agg.empty()) return o.model;
  if (o.model.rfind("mil", 0) != 0) throw Error("--agg applies only to mil-* models");
  if (o.agg == "uniform") return "mil-avg";
  if (o.agg == "softmax") return "mil-softmax";
  if (o.agg == "sigmoid") return "mil-sigmoid";
  throw Error("unknown aggregation '" + o.agg + "' (uniform|softmax|sigmoid)");
}

int run_train(const TrainCmd& o, const json& cfg) {
  fs::create_directories(o.out);
  std::string model_name = effective_model(o);
  Corpus train_split = load_corpus(o.train_path, o.classes, "train");
  Corpus val_split = load_corpus(o.val_path, o.classes, "validation");
  fs::path ckpt = fs::path(o.out) / "checkpoint.bin";

  std::string trainlog;
  if (model_name == "rev-lr-emb" || model_name == "rev-lr-bow" || model_name == "seg-lr") {
    Vocabulary vocab = Vocabulary::build(train_split);
    Tensor emb;
    if (model_name != "rev-lr-bow")
      emb = o.embeddings_path.empty() ? init_embeddings(vocab, o.spec.emb_dim, o.train_cfg.seed)
                                      : load_embeddings(o.embeddings_path, vocab, o.spec.emb_dim, o.train_cfg.seed);
    LinearTextModel model = model_name == "rev-lr-bow" ? LinearTextModel::train_rev_lr_bow(train_split, o.lr_cfg)
                            : model_name == "rev-lr-emb"
                                ? LinearTextModel::train_rev_lr_emb(train_split, vocab, emb, o.lr_cfg)
                                : LinearTextModel::train_seg_lr(train_split, vocab, emb, o.lr_cfg);
    model.save(ckpt.string());

    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    std::vector<double> weights;
    std::vector<int> pred, gold;
    for (const Review& r : val_split.reviews) {
      probs.push_back(model.forward_review(r).review_prob);
      labels.push_back(r.label);
      weights.push_back(r.sample_weight);
      pred.push_back(argmax_label(probs.back()));
      gold.push_back(r.label);
    }
    std::vector<int> classes(static_cast<size_t>(o.classes));
    for (int c = 0; c < o.classes; ++c) classes[static_cast<size_t>(c)] = c + 1;
    json line;
    line["epoch"] = 1;
    line["train_loss"] = 0.0;
    line["val_loss"] = nll_value(probs, labels, weights);
    line["val_macro_f1"] = macro_f1(pred, gold, classes);
    trainlog = line.dump() + "\n";
  } else {
    ModelSpec spec = o.spec;
    spec.kind = model_name;
    spec.num_classes = o.classes;
    Vocabulary vocab = Vocabulary::build(train_split);
    Tensor emb = o.embeddings_path.empty()
                     ? init_embeddings(vocab, spec.emb_dim, o.train_cfg.seed)
                     : load_embeddings(o.embeddings_path, vocab, spec.emb_dim, o.train_cfg.seed);
    std::unique_ptr<NeuralModel> model = make_neural_model(spec, vocab, emb, o.train_cfg.seed);
    TrainResult result = train(*model, train_split, val_split, o.train_cfg);
    save_model(ckpt.string(), *model);
    for (const EpochStats& e : result.log) {
      json line;
      line["epoch"] = e.epoch;
      line["train_loss"] = e.train_loss;
      line["val_loss"] = e.val_loss;
      line["val_macro_f1"] = e.val_macro_f1;
      trainlog += line.dump() + "\n";
    }
    std::cout << "train: best epoch " << result.best_epoch << " val_loss " << result.best_val_loss << "\n";
  }
  write_text_atomic(fs::path(o.out) / "trainlog.jsonl", trainlog);
  write_manifest(o.out, "train", cfg, {"checkpoint.bin", "checkpoint.bin.meta.json", "trainlog.jsonl"});
  std::cout << "train: wrote " << ckpt.string() << "\n";
  return 0;
}

// --- eval -----------------------------------------------------------------------

struct EvalCmd {
  std::string out;
  std::string checkpoint;
  std::string test_path;
  std::string mode = "review";  // review | binary | three-class
  int classes = 2;
  int positive_class = 2;
  int bootstrap_iterations = 0;
  int bootstrap_size = 1000;
  int folds = 10;
  std::uint64_t seed = 0;
  bool avg_alpha_one = false;
  bool prcurve = false;
};

json prf_to_json(const Prf& prf) {
  json j;
  j["precision"] = prf.precision;
  j["recall"] = prf.recall;
  j["f1"] = prf.f1;
  if (prf.zero_division) j["zero_division"] = true;
  return j;
}

int run_eval(const EvalCmd& o, const json& cfg) {
  fs::create_directories(o.out);
  LoadedModel model = load_any_model(o.checkpoint);
  Corpus test = load_corpus(o.test_path, o.classes, "test");

  // Forward every review once; reuse for review- and segment-level metrics.
  std::vector<ReviewPrediction> preds;
  preds.reserve(test.reviews.size());
  for (const Review& r : test.reviews) {
    preds.push_back(model.forward_review(r));
    if (o.avg_alpha_one && model.kind() == "mil-avg")
      for (double& a : preds.back().alpha) a = 1.0;
  }

  json report;
  report["mode"] = o.mode;
  report["model"] = model.kind();
  std::vector<std::string> outputs = {"report.json"};

  if (o.mode == "three-class") {
    if (model.num_classes() < 2) throw Error("eval: model has fewer than two classes");
    std::vector<double> weights = polarity_weights(model.num_classes());
    std::vector<ScoredSegment> segments;
    for (size_t ri = 0; ri < test.reviews.size(); ++ri) {
      const Review& r = test.reviews[ri];
      for (size_t si = 0; si < r.segments.size(); ++si) {
        if (!r.segments[si].gold_label) continue;
        int gold = *r.segments[si].gold_label;
        if (gold < 1 || gold > 3) throw Error("eval: three-class mode expects gold labels in 1..3");
        double g = polarity_score(preds[ri].segment_probs[si], weights);
        segments.push_back(ScoredSegment{gate(g, preds[ri].alpha[si]), gold});
      }
    }
    if (segments.empty()) throw Error("eval: no gold-labeled segments in '" + o.test_path + "'");
    ThresholdCvResult cv = search_thresholds_cv(segments, o.folds);
    json seg;
    seg["num_segments"] = segments.size();
    seg["mean_macro_f1"] = cv.mean_macro_f1;
    seg["fold_macro_f1"] = cv.fold_macro_f1;
    json pairs = json::array();
    for (auto [t1, t2] : cv.fold_thresholds) pairs.push_back({t1, t2});
    seg["fold_thresholds"] = std::move(pairs);
    report["segment"] = std::move(seg);
  } else if (o.mode == "binary") {
    int pos = o.positive_class;
    std::vector<int> rev_pred, rev_gold;
    std::vector<double> rev_conf, rev_w;
    for (size_t ri = 0; ri < test.reviews.size(); ++ri) {
      rev_pred.push_back(argmax_label(preds[ri].review_prob));
      rev_gold.push_back(test.reviews[ri].label);
      rev_conf.push_back(preds[ri].review_prob[static_cast<size_t>(pos - 1)]);
      rev_w.push_back(test.reviews[ri].sample_weight);
    }
    json rev;
    Prf rprf = prf_weighted(rev_pred, rev_gold, rev_w, pos);
    rev.update(prf_to_json(rprf));
    rev["aupr"] = aupr(rev_conf, rev_gold, pos);
    double wacc = 0, wtot = 0;
    for (size_t i = 0; i < rev_pred.size(); ++i) {
      wtot += rev_w[i];
      if (rev_pred[i] == rev_gold[i]) wacc += rev_w[i];
    }
    rev["accuracy"] = wtot > 0 ? wacc / wtot : 0.0;

    if (o.bootstrap_iterations > 0) {
      BootstrapConfig bs;
      bs.iterations = o.bootstrap_iterations;
      bs.resample_size = o.bootstrap_size;
      bs.seed = o.seed;
      auto f1_metric = [&](const std::vector<int>& idx) -> std::optional<double> {
        std::vector<int> p, g;
        std::vector<double> w;
        for (int i : idx) {
          p.push_back(rev_pred[static_cast<size_t>(i)]);
          g.push_back(rev_gold[static_cast<size_t>(i)]);
          w.push_back(rev_w[static_cast<size_t>(i)]);
        }
        Prf prf = prf_weighted(p, g, w, pos);
        if (prf.zero_division) return std::nullopt;
        return prf.f1;
      };
      auto aupr_metric = [&](const std::vector<int>& idx) -> std::optional<double> {
        std::vector<double> c;
        std::vector<int> g;
        bool has_pos = false, has_neg = false;
        for (int i : idx) {
          c.push_back(rev_conf[static_cast<size_t>(i)]);
          g.push_back(rev_gold[static_cast<size_t>(i)]);
          has_pos = has_pos || g.back() == pos;
          has_neg = has_neg || g.back() != pos;
        }
        if (!has_pos || !has_neg) return std::nullopt;
        return aupr(c, g, pos);
      };
      int population = static_cast<int>(test.reviews.size());
      auto [f1_lo, f1_hi] = bootstrap_ci(f1_metric, population, bs);
      rev["f1_ci"] = {f1_lo, f1_hi};
      auto [au_lo, au_hi] = bootstrap_ci(aupr_metric, population, bs);
      rev["aupr_ci"] = {au_lo, au_hi};
    }
    report["review"] = std::move(rev);

    // Segment level over gold-labeled segments; confidence = p(pos) * alpha.
    std::vector<int> seg_pred, seg_gold;
    std::vector<double> seg_conf, seg_w;
    for (size_t ri = 0; ri < test.reviews.size(); ++ri) {
      const Review& r = test.reviews[ri];
      for (size_t si = 0; si < r.segments.size(); ++si) {
        if (!r.segments[si].gold_label) continue;
        seg_pred.push_back(argmax_label(preds[ri].segment_probs[si]));
        seg_gold.push_back(*r.segments[si].gold_label);
        seg_conf.push_back(preds[ri].segment_probs[si][static_cast<size_t>(pos - 1)] * preds[ri].alpha[si]);
        seg_w.push_back(r.sample_weight);
      }
    }
    if (!seg_pred.empty()) {
      json seg;
      seg.update(prf_to_json(prf_weighted(seg_pred, seg_gold, seg_w, pos)));
      seg["aupr"] = aupr(seg_conf, seg_gold, pos);
      double acc = 0, tot = 0;
      for (size_t i = 0; i < seg_pred.size(); ++i) {
        tot += seg_w[i];
        if (seg_pred[i] == seg_gold[i]) acc += seg_w[i];
      }
      seg["accuracy"] = tot > 0 ? acc / tot : 0.0;
      seg["count"] = seg_pred.size();
      report["segment"] = std::move(seg);

      if (o.prcurve) {
        std::vector<int> order(seg_conf.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return seg_conf[static_cast<size_t>(a)] > seg_conf[static_cast<size_t>(b)];
        });
        double positives = 0;
        for (int g : seg_gold) positives += g == pos;
        std::string csv = "confidence,recall,precision\n";
        double tp = 0, seen = 0;
        size_t i = 0;
        while (i < order.size()) {
          size_t j = i;
          while (j < order.size() &&
                 seg_conf[static_cast<size_t>(order[j])] == seg_conf[static_cast<size_t>(order[i])])
            ++j;
          for (size_t k = i; k < j; ++k) {
            ++seen;
            tp += seg_gold[static_cast<size_t>(order[k])] == pos;
          }
          csv += std::to_string(seg_conf[static_cast<size_t>(order[i])]) + "," + std::to_string(tp / positives) +
                 "," + std::to_string(tp / seen) + "\n";
          i = j;
        }
        write_text_atomic(fs::path(o.out) / "prcurve.csv", csv);
        outputs.push_back("prcurve.csv");
      }
    }
  } else if (o.mode == "review") {
    std::vector<int> classes(static_cast<size_t>(o.classes));
    for (int c = 0; c < o.classes; ++c) classes[static_cast<size_t>(c)] = c + 1;
    std::vector<int> rev_pred, rev_gold;
    for (size_t ri = 0; ri < test.reviews.size(); ++ri) {
      rev_pred.push_back(argmax_label(preds[ri].review_prob));
      rev_gold.push_back(test.reviews[ri].label);
    }
    json rev;
    rev["macro_f1"] = macro_f1(rev_pred, rev_gold, classes);
    double acc = 0;
    for (size_t i = 0; i < rev_pred.size(); ++i) acc += rev_pred[i] == rev_gold[i];
    rev["accuracy"] = acc / static_cast<double>(rev_pred.size());
    report["review"] = std::move(rev);

    std::vector<int> seg_pred, seg_gold;
    for (size_t ri = 0; ri < test.reviews.size(); ++ri) {
      const Review& r = test.reviews[ri];
      for (size_t si = 0; si < r.segments.size(); ++si) {
        if (!r.segments[si].gold_label) continue;
        seg_pred.push_back(argmax_label(preds[ri].segment_probs[si]));
        seg_gold.push_back(*r.segments[si].gold_label);
      }
    }
    if (!seg_pred.empty()) {
      json seg;
      seg["macro_f1"] = macro_f1(seg_pred, seg_gold, classes);
      double acc2 = 0;
      for (size_t i = 0; i < seg_pred.size(); ++i) acc2 += seg_pred[i] == seg_gold[i];
      seg["accuracy"] = acc2 / static_cast<double>(seg_pred.size());
      seg["count"] = seg_pred.size();
      report["segment"] = std::move(seg);
    }
  } else {
    throw Error("unknown eval mode '" + o.mode + "' (review|binary|three-class)");
  }

  write_text_atomic(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  write_manifest(o.out, "eval", cfg, outputs);
  std::cout << "eval: wrote " << (fs::path(o.out) / "report.json").string() << "\n";
  return 0;
}

// --- highlight ------------------------------------------------------------------

struct HighlightCmd {
  std::string out;
  std::string checkpoint;
  std::string reviews_path;
  int classes = 2;
  double threshold = 0.1;
  std::string format = "html";  // html | ansi
};

int run_highlight(const HighlightCmd& o, const json& cfg) {
  fs::create_directories(o.out);
  LoadedModel model = load_any_model(o.checkpoint);
  if (!model.is_mil()) throw Error("highlight: checkpoint '" + o.checkpoint + "' is not a MIL model (no attention to render)");
  Corpus reviews = load_corpus(o.reviews_path, o.classes, "highlight");

  std::vector<HighlightedReview> items;
  items.reserve(reviews.reviews.size());
  for (const Review& r : reviews.reviews) items.push_back(HighlightedReview{&r, model.forward_review(r)});

  std::string filename = o.format == "html" ? "highlights.html" : "highlights.txt";
  std::string rendered = o.format == "html" ? render_highlights_html(items, o.threshold)
                                            : render_highlights_ansi(items, o.threshold);
  write_text_atomic(fs::path(o.out) / filename, rendered);
  write_manifest(o.out, "highlight", cfg, {filename});
  std::cout << "highlight: wrote " << (fs::path(o.out) / filename).string() << "\n";
  return 0;
}

// --- stats ----------------------------------------------------------------------

struct StatsCmd {
  std::string out;
  std::string corpus_path;
  int classes = 2;
};

int run_stats(const StatsCmd& o, const json& cfg) {
  fs::create_directories(o.out);
  Corpus corpus = load_corpus(o.corpus_path, o.classes, "stats");
  json stats = stats_to_json(corpus_stats(corpus));
  write_text_atomic(fs::path(o.out) / "stats.json", stats.dump(2) + "\n");
  write_manifest(o.out, "stats", cfg, {"stats.json"});
  std::cout << stats.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miltext: weakly supervised segment-level review classification"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthCmd synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with a controlled witness rate");
  synth_cmd->set_config("--config");
  synth_cmd->add_option("--out", synth.out, "Run directory")->required();
  synth_cmd->add_option("--reviews", synth.spec.train_reviews, "Training reviews");
  synth_cmd->add_option("--val-reviews", synth.spec.val_reviews, "Validation reviews");
  synth_cmd->add_option("--test-reviews", synth.spec.test_reviews, "Test reviews (carry gold segment labels)");
  synth_cmd->add_option("--classes", synth.spec.num_classes, "Number of classes (class 1 is background)");
  synth_cmd->add_option("--wr", synth.spec.witness_rate, "Target witness rate in (0,1]");
  synth_cmd->add_option("--min-segs", synth.spec.min_segments, "Minimum segments per review");
  synth_cmd->add_option("--max-segs", synth.spec.max_segments, "Maximum segments per review");
  synth_cmd->add_option("--min-tokens", synth.spec.min_tokens, "Minimum tokens per segment");
  synth_cmd->add_option("--max-tokens", synth.spec.max_tokens, "Maximum tokens per segment");
  synth_cmd->add_option("--class-vocab", synth.spec.class_vocab_size, "Indicative tokens per marked class");
  synth_cmd->add_option("--background-vocab", synth.spec.background_vocab_size, "Background vocabulary size");
  synth_cmd->add_option("--noise", synth.spec.noise_rate, "Witness-token noise rate in [0,1)");
  synth_cmd->add_option("--seed", synth.spec.seed, "Random seed");

  TrainCmd traincmd;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->set_config("--config");
  train_cmd->add_option("--out", traincmd.out, "Run directory")->required();
  train_cmd->add_option("--model", traincmd.model, "Model kind")->check(CLI::IsMember(kModelNames));
  train_cmd->add_option("--agg", traincmd.agg, "Aggregation override for mil models (uniform|softmax|sigmoid)");
  train_cmd->add_option("--train", traincmd.train_path, "Training corpus (jsonl)")->required();
  train_cmd->add_option("--val", traincmd.val_path, "Validation corpus (jsonl)")->required();
  train_cmd->add_option("--classes", traincmd.classes, "Number of classes");
  train_cmd->add_option("--embeddings", traincmd.embeddings_path, "Pretrained word2vec text file");
  train_cmd->add_option("--emb-dim", traincmd.spec.emb_dim, "Embedding dimension");
  train_cmd->add_option("--cnn-widths", traincmd.spec.cnn_widths, "CNN kernel widths")->delimiter(',');
  train_cmd->add_option("--cnn-maps", traincmd.spec.cnn_feature_maps, "Feature maps per kernel width");
  train_cmd->add_option("--gru-hidden", traincmd.spec.gru_hidden, "GRU hidden size per direction");
  train_cmd->add_option("--att-dim", traincmd.spec.att_dim, "Attention dimension");
  train_cmd->add_option("--dropout", traincmd.spec.dropout, "Dropout rate");
  train_cmd->add_option("--activation", traincmd.spec.activation, "CNN activation (relu|tanh)");
  train_cmd->add_option("--batch", traincmd.train_cfg.batch_size, "Mini-batch size");
  train_cmd->add_option("--epochs", traincmd.train_cfg.max_epochs, "Maximum epochs");
  train_cmd->add_option("--patience", traincmd.train_cfg.patience, "Early-stopping patience");
  train_cmd->add_option("--lr", traincmd.train_cfg.learning_rate, "Adadelta learning rate");
  train_cmd->add_option("--rho", traincmd.train_cfg.rho, "Adadelta decay");
  train_cmd->add_option("--l2", traincmd.train_cfg.l2, "L2 strength on the classifier weights");
  train_cmd->add_option("--clip-norm", traincmd.train_cfg.clip_norm, "Gradient clip (0 = off)");
  train_cmd->add_option("--seed", traincmd.train_cfg.seed, "Random seed");
  train_cmd->add_option("--lr-iters", traincmd.lr_cfg.max_iters, "Iteration cap for the lr-family models");
  train_cmd->add_option("--lr-l2", traincmd.lr_cfg.l2, "L2 strength for the lr-family models");

  EvalCmd evalcmd;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test corpus");
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--out", evalcmd.out, "Run directory")->required();
  eval_cmd->add_option("--checkpoint", evalcmd.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--test", evalcmd.test_path, "Test corpus (jsonl)")->required();
  eval_cmd->add_option("--mode", evalcmd.mode, "review | binary | three-class");
  eval_cmd->add_option("--classes", evalcmd.classes, "Number of classes in the test corpus");
  eval_cmd->add_option("--positive-class", evalcmd.positive_class, "Positive class for binary mode");
  eval_cmd->add_option("--bootstrap", evalcmd.bootstrap_iterations, "Bootstrap iterations (0 = off)");
  eval_cmd->add_option("--bootstrap-size", evalcmd.bootstrap_size, "Reviews per bootstrap resample");
  eval_cmd->add_option("--folds", evalcmd.folds, "Folds for threshold cross-validation");
  eval_cmd->add_option("--seed", evalcmd.seed, "Bootstrap seed");
  eval_cmd->add_flag("--avg-alpha-one", evalcmd.avg_alpha_one, "Gate mil-avg with weight 1 instead of 1/M");
  eval_cmd->add_flag("--prcurve", evalcmd.prcurve, "Emit segment-level PR curve points as CSV");

  HighlightCmd hlcmd;
  CLI::App* hl_cmd = app.add_subcommand("highlight", "Render attention-highlighted reviews");
  hl_cmd->set_config("--config");
  hl_cmd->add_option("--out", hlcmd.out, "Run directory")->required();
  hl_cmd->add_option("--checkpoint", hlcmd.checkpoint, "MIL checkpoint path")->required();
  hl_cmd->add_option("--reviews", hlcmd.reviews_path, "Reviews to render (jsonl)")->required();
  hl_cmd->add_option("--classes", hlcmd.classes, "Number of classes");
  hl_cmd->add_option("--threshold", hlcmd.threshold, "Highlight segments with attention above this");
  hl_cmd->add_option("--format", hlcmd.format, "html | ansi")->check(CLI::IsMember({"html", "ansi"}));

  StatsCmd statscmd;
  CLI::App* stats_cmd = app.add_subcommand("stats", "Witness-rate statistics of a gold-labeled corpus");
  stats_cmd->set_config("--config");
  stats_cmd->add_option("--out", statscmd.out, "Run directory")->required();
  stats_cmd->add_option("--corpus", statscmd.corpus_path, "Corpus (jsonl, gold segment labels)")->required();
  stats_cmd->add_option("--classes", statscmd.classes, "Number of classes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return run_synth(synth, collect_config(synth_cmd));
    if (train_cmd->parsed()) return run_train(traincmd, collect_config(train_cmd));
    if (eval_cmd->parsed()) return run_eval(evalcmd, collect_config(eval_cmd));
    if (hl_cmd->parsed()) return run_highlight(hlcmd, collect_config(hl_cmd));
    if (stats_cmd->parsed()) return run_stats(statscmd, collect_config(stats_cmd));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
