#include <doctest.h>

#include <cmath>

#include "miltext/synthetic.hpp"
#include "miltext/training.hpp"

using namespace miltext;

namespace {

Corpus reviews_with_sizes(const std::vector<int>& sizes) {
  Corpus c;
  c.num_classes = 2;
  for (size_t i = 0; i < sizes.size(); ++i) {
    Review r;
    r.id = "r" + std::to_string(i);
    r.label = 1 + static_cast<int>(i % 2);
    for (int j = 0; j < sizes[i]; ++j) r.segments.push_back(Segment{{"tok"}, "tok", std::nullopt});
    c.reviews.push_back(std::move(r));
  }
  return c;
}

ModelSpec small_spec(const std::string& kind, int classes = 2) {
  ModelSpec spec;
  spec.kind = kind;
  spec.num_classes = classes;
  spec.emb_dim = 12;
  spec.cnn_widths = {2, 3};
  spec.cnn_feature_maps = 6;
  spec.gru_hidden = 4;
  spec.att_dim = 6;
  spec.dropout = 0.2;
  return spec;
}

}  // namespace

TEST_CASE("make_batches") {
  SUBCASE("five reviews with batch size two chunk into 2/2/1") {
    Corpus c = reviews_with_sizes({4, 1, 3, 2, 5});
    BatchPlan plan = make_batches(c, 2, 0);
    REQUIRE(plan.batches.size() == 3);
    CHECK(plan.batches[0].review_indices.size() == 2);
    CHECK(plan.batches[1].review_indices.size() == 2);
    CHECK(plan.batches[2].review_indices.size() == 1);
  }
  SUBCASE("batches are sorted by segment count") {
    Corpus c = reviews_with_sizes({9, 2, 7, 1, 5, 3, 8, 4});
    BatchPlan plan = make_batches(c, 3, 1);
    for (size_t b = 0; b + 1 < plan.batches.size(); ++b) {
      int max_m = 0;
      for (int idx : plan.batches[b].review_indices)
        max_m = std::max(max_m, static_cast<int>(c.reviews[static_cast<size_t>(idx)].segments.size()));
      CHECK(max_m == plan.batches[b].max_segments);
      for (int idx : plan.batches[b + 1].review_indices)
        CHECK(static_cast<int>(c.reviews[static_cast<size_t>(idx)].segments.size()) >= max_m);
    }
  }
  SUBCASE("every review appears exactly once") {
    Corpus c = reviews_with_sizes({4, 1, 3, 2, 5, 6, 2, 2});
    BatchPlan plan = make_batches(c, 3, 7);
    std::vector<int> seen;
    for (const Batch& b : plan.batches)
      for (int idx : b.review_indices) seen.push_back(idx);
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 8; ++i) CHECK(seen[static_cast<size_t>(i)] == i);
    CHECK(plan.order.size() == plan.batches.size());
  }
  SUBCASE("order shuffling is seed-deterministic") {
    Corpus c = reviews_with_sizes({4, 1, 3, 2, 5, 6, 2, 2, 9, 1, 3});
    CHECK(make_batches(c, 2, 5).order == make_batches(c, 2, 5).order);
    CHECK(make_batches(c, 2, 5).order != make_batches(c, 2, 6).order);
  }
}

TEST_CASE("nll loss") {
  SUBCASE("uniform predictions over five classes cost ln 5") {
    std::vector<std::vector<double>> probs = {{0.2, 0.2, 0.2, 0.2, 0.2}};
    CHECK(nll_value(probs, {3}, {1.0}) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  }
  SUBCASE("weighted two-review case matches hand arithmetic") {
    std::vector<std::vector<double>> probs = {{0.8, 0.2}, {0.3, 0.7}};
    double expected = (2.0 * -std::log(0.8) + 0.5 * -std::log(0.7)) / 2.5;
    CHECK(nll_value(probs, {1, 2}, {2.0, 0.5}) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("zero total weight is an error") {
    CHECK_THROWS_AS(nll_value({{0.5, 0.5}}, {1}, {0.0}), Error);
  }
  SUBCASE("graph form: perfect prediction leaves only the L2 term") {
    ModelParams params;
    params.add("clf.W", Tensor::matrix(2, 2, {1.0, -2.0, 0.5, 0.0}));
    Tape t;
    RefMap refs = t.params(params);
    Ref p = t.leaf(Tensor::row({1.0, 0.0}));
    Ref loss = nll_loss_graph(t, {p}, {1}, {1.0}, refs.at("clf.W"), 0.01);
    double l2 = 0.01 * (1.0 + 4.0 + 0.25 + 0.0);
    CHECK(loss.val().item() == doctest::Approx(l2).epsilon(1e-12));
  }
  SUBCASE("graph and value forms agree") {
    std::vector<std::vector<double>> probs = {{0.6, 0.4}, {0.25, 0.75}, {0.5, 0.5}};
    std::vector<int> labels = {1, 2, 2};
    std::vector<double> weights = {1.0, 2.0, 0.5};
    ModelParams params;
    params.add("clf.W", Tensor::zeros({2, 2}));
    Tape t;
    RefMap refs = t.params(params);
    std::vector<Ref> prefs;
    for (const auto& p : probs) prefs.push_back(t.leaf(Tensor::row(p)));
    Ref loss = nll_loss_graph(t, prefs, labels, weights, refs.at("clf.W"), 0.0);
    CHECK(loss.val().item() == doctest::Approx(nll_value(probs, labels, weights)).epsilon(1e-12));
  }
}

TEST_CASE("train on a separable synthetic corpus") {
  SyntheticSpec synth;
  synth.num_classes = 2;
  synth.train_reviews = 160;
  synth.val_reviews = 40;
  synth.test_reviews = 40;
  synth.min_segments = 2;
  synth.max_segments = 4;
  synth.min_tokens = 2;
  synth.max_tokens = 5;
  synth.witness_rate = 1.0;
  synth.noise_rate = 0.0;
  synth.class_vocab_size = 12;
  synth.background_vocab_size = 40;
  synth.seed = 9;
  SyntheticCorpus corpus = generate_synthetic(synth);

  Vocabulary vocab = Vocabulary::build(corpus.train);
  ModelSpec spec = small_spec("mil-softmax");
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 40;
  cfg.patience = 10;
  cfg.learning_rate = 1.0;  // desk-scale corpora need the classic Adadelta rate
  cfg.seed = 4;

  auto run = [&]() {
    MilModel model(spec, vocab, init_embeddings(vocab, spec.emb_dim, cfg.seed), cfg.seed);
    TrainResult result = train(model, corpus.train, corpus.val, cfg);
    return std::make_pair(std::move(result), review_macro_f1(model, corpus.val));
  };

  auto [result, f1] = run();
  SUBCASE("reaches validation macro-F1 0.95 on the separable task") {
    CHECK(f1 >= 0.95);
    CHECK(result.log.size() <= 40);
  }
  SUBCASE("training is seed-deterministic") {
    auto [result2, f1_2] = run();
    REQUIRE(result.log.size() == result2.log.size());
    for (size_t i = 0; i < result.log.size(); ++i) {
      CHECK(result.log[i].train_loss == result2.log[i].train_loss);
      CHECK(result.log[i].val_loss == result2.log[i].val_loss);
      CHECK(result.log[i].val_macro_f1 == result2.log[i].val_macro_f1);
    }
    CHECK(f1 == f1_2);
  }
  SUBCASE("early stopping keeps the best-validation checkpoint") {
    double best = 1e300;
    for (const EpochStats& e : result.log) best = std::min(best, e.val_loss);
    CHECK(result.best_val_loss == best);
    MilModel model(spec, vocab, init_embeddings(vocab, spec.emb_dim, cfg.seed), cfg.seed);
    model.set_params(result.best_params);
    CHECK(evaluate_loss(model, corpus.val, cfg.l2) == doctest::Approx(result.best_val_loss).epsilon(1e-12));
  }
  SUBCASE("stopping rule: at most patience epochs beyond the best one") {
    CHECK(static_cast<int>(result.log.size()) - result.best_epoch <= cfg.patience + 1);
  }
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
  SyntheticSpec synth;
  synth.train_reviews = 30;
  synth.val_reviews = 10;
  synth.test_reviews = 5;
  synth.min_segments = 2;
  synth.max_segments = 3;
  synth.witness_rate = 1.0;
  synth.seed = 2;
  SyntheticCorpus corpus = generate_synthetic(synth);
  Vocabulary vocab = Vocabulary::build(corpus.train);
  ModelSpec spec = small_spec("mil-avg");
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.max_epochs = 25;
  cfg.patience = 0;
  cfg.seed = 3;
  MilModel model(spec, vocab, init_embeddings(vocab, spec.emb_dim, cfg.seed), cfg.seed);
  TrainResult result = train(model, corpus.train, corpus.val, cfg);
  // every epoch before the last must have improved on the running best
  double best = 1e300;
  for (size_t i = 0; i + 1 < result.log.size(); ++i) {
    CHECK(result.log[i].val_loss < best);
    best = result.log[i].val_loss;
  }
  if (static_cast<int>(result.log.size()) < cfg.max_epochs) CHECK(result.log.back().val_loss >= best);
}

TEST_CASE("divergence aborts with a diagnostic") {
  Corpus train_split = reviews_with_sizes({2, 2, 2, 2});
  Corpus val_split = reviews_with_sizes({2, 2});
  Vocabulary vocab = Vocabulary::build(train_split);
  ModelSpec spec = small_spec("mil-avg");
  MilModel model(spec, vocab, init_embeddings(vocab, spec.emb_dim, 1), 1);
  for (double& v : model.params().at("clf.W").tensor.values) v = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 3;
  cfg.patience = 1;
  CHECK_THROWS_WITH_AS(train(model, train_split, val_split, cfg), doctest::Contains("diverged"), Error);
}
