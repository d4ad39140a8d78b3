#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "fd_check.hpp"
#include "miltext/models.hpp"
#include "miltext/training.hpp"

using namespace miltext;
using nlohmann::json;

namespace {

Segment seg(std::initializer_list<const char*> tokens) {
  Segment s;
  for (const char* t : tokens) s.tokens.push_back(t);
  for (const char* t : tokens) {
    if (!s.raw_text.empty()) s.raw_text += ' ';
    s.raw_text += t;
  }
  return s;
}

Review review(std::string id, int label, std::vector<Segment> segments) {
  Review r;
  r.id = std::move(id);
  r.label = label;
  r.segments = std::move(segments);
  return r;
}

ModelSpec tiny_spec(const std::string& kind, int classes = 2) {
  ModelSpec spec;
  spec.kind = kind;
  spec.num_classes = classes;
  spec.emb_dim = 6;
  spec.cnn_widths = {2, 3};
  spec.cnn_feature_maps = 4;
  spec.gru_hidden = 3;
  spec.att_dim = 5;
  spec.dropout = 0.0;
  return spec;
}

Vocabulary tiny_vocab() {
  Vocabulary v;
  for (const char* t : {"food", "was", "great", "got", "sick", "after", "service", "slow", "fine"}) v.add(t);
  return v;
}

Tensor tiny_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros({vocab.size(), dim});
  for (int i = dim; i < static_cast<int>(t.values.size()); ++i) t.values[static_cast<size_t>(i)] = rng.uniform(-0.25, 0.25);
  return t;
}

}  // namespace

TEST_CASE("classify_segment") {
  Tape t;
  SUBCASE("zero parameters give the uniform distribution") {
    Ref w = t.leaf(Tensor::zeros({3, 4}));
    Ref b = t.leaf(Tensor::zeros({3}));
    Ref h = t.leaf(Tensor::row({1.0, -2.0, 0.5, 3.0}));
    Ref p = classify_segment(t, w, b, h);
    for (double v : p.val().values) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("a dominant bias saturates the softmax") {
    Ref w = t.leaf(Tensor::zeros({2, 3}));
    Ref b = t.leaf(Tensor::row({10.0, 0.0}));
    Ref h = t.leaf(Tensor::row({1.0, 1.0, 1.0}));
    Ref p = classify_segment(t, w, b, h);
    CHECK(p.val().values[0] > 0.9999);
    CHECK(p.val().values[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
  }
  SUBCASE("sums to one on random inputs") {
    Rng rng(3);
    for (int round = 0; round < 10; ++round) {
      Tensor wv = Tensor::zeros({4, 5});
      for (double& v : wv.values) v = rng.uniform(-2, 2);
      Tensor hv = Tensor::zeros({5});
      for (double& v : hv.values) v = rng.uniform(-2, 2);
      Ref p = classify_segment(t, t.leaf(wv), t.leaf(Tensor::zeros({4})), t.leaf(hv));
      double total = 0.0;
      for (double v : p.val().values) total += v;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention_score") {
  Tape t;
  SUBCASE("zero query vector zeroes every score") {
    AttRefs att{t.leaf(Tensor::zeros({3, 2})), t.leaf(Tensor::zeros({3})), t.leaf(Tensor::zeros({3}))};
    Ref e = attention_score(t, att, t.leaf(Tensor::row({0.4, -1.0})));
    CHECK(e.val().item() == 0.0);
  }
  SUBCASE("scalar case evaluates tanh") {
    AttRefs att{t.leaf(Tensor::matrix(1, 1, {1.0})), t.leaf(Tensor::row({0.0})), t.leaf(Tensor::row({1.0}))};
    Ref e = attention_score(t, att, t.leaf(Tensor::row({0.5})));
    CHECK(std::abs(e.val().item() - std::tanh(0.5)) < 1e-12);
    CHECK(e.val().item() == doctest::Approx(0.46211715726000974).epsilon(1e-12));
  }
  SUBCASE("identical inputs get identical scores") {
    Rng rng(5);
    Tensor wv = Tensor::zeros({4, 3});
    for (double& v : wv.values) v = rng.uniform(-1, 1);
    Tensor uv = Tensor::zeros({4});
    for (double& v : uv.values) v = rng.uniform(-1, 1);
    AttRefs att{t.leaf(wv), t.leaf(Tensor::zeros({4})), t.leaf(uv)};
    Tensor h = Tensor::row({0.3, -0.7, 1.1});
    Ref e1 = attention_score(t, att, t.leaf(h));
    Ref e2 = attention_score(t, att, t.leaf(h));
    CHECK(e1.val().item() == e2.val().item());
  }
}

TEST_CASE("softmax and sigmoid attention weights") {
  SUBCASE("softmax of equal scores splits evenly") {
    Tape t;
    Ref a = softmax_weights(t, t.leaf(Tensor::row({0.0, 0.0})));
    CHECK(a.val().values[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("softmax of [ln2, 0, 0]") {
    Tape t;
    Ref a = softmax_weights(t, t.leaf(Tensor::row({std::log(2.0), 0.0, 0.0})));
    CHECK(std::abs(a.val().values[0] - 0.5) < 1e-12);
    CHECK(std::abs(a.val().values[1] - 0.25) < 1e-12);
    CHECK(std::abs(a.val().values[2] - 0.25) < 1e-12);
  }
  SUBCASE("softmax weights sum to one and are shift invariant") {
    Rng rng(6);
    for (int round = 0; round < 20; ++round) {
      Tensor e = Tensor::zeros({5});
      for (double& v : e.values) v = rng.uniform(-30, 30);
      Tensor shifted = e;
      double c = rng.uniform(-5, 5);
      for (double& v : shifted.values) v += c;
      Tape t;
      Ref a = softmax_weights(t, t.leaf(e));
      Ref b = softmax_weights(t, t.leaf(shifted));
      double total = 0.0;
      for (double v : a.val().values) total += v;
      CHECK(std::abs(total - 1.0) <= 1e-9);
      for (size_t i = 0; i < 5; ++i) CHECK(a.val().values[i] == doctest::Approx(b.val().values[i]).epsilon(1e-9));
    }
  }
  SUBCASE("sigmoid weight of zero score is one half") {
    Tape t;
    Ref a = sigmoid_weights(t, t.leaf(Tensor::row({0.0})));
    CHECK(a.val().values[0] == 0.5);
  }
  SUBCASE("large negative scores saturate to zero without error") {
    Tape t;
    Ref a = sigmoid_weights(t, t.leaf(Tensor::row({-40.0})));
    CHECK(a.val().values[0] > 0.0);
    CHECK(a.val().values[0] < 1e-15);
  }
  SUBCASE("sigmoid weights are per-segment independent, bit-exactly") {
    Tensor e = Tensor::row({0.3, -1.2, 2.5, 0.0});
    Tape t1;
    Ref a1 = sigmoid_weights(t1, t1.leaf(e));
    Tensor e2 = e;
    e2.values[2] = 77.0;  // perturb one score
    Tape t2;
    Ref a2 = sigmoid_weights(t2, t2.leaf(e2));
    for (size_t i = 0; i < e.values.size(); ++i) {
      if (i == 2) continue;
      CHECK(a1.val().values[i] == a2.val().values[i]);  // bitwise
    }
  }
  SUBCASE("equal sigmoid scores reduce aggregation to the uniform average") {
    Tape t;
    Ref alpha = sigmoid_weights(t, t.leaf(Tensor::row({0.7, 0.7, 0.7})));
    Ref probs = t.leaf(Tensor::matrix(3, 2, {0.9, 0.1, 0.2, 0.8, 0.5, 0.5}));
    AggregateOut agg = aggregate(t, probs, alpha);
    Ref mean = t.mean_rows(probs);
    for (size_t i = 0; i < 2; ++i)
      CHECK(agg.prob.val().values[i] == doctest::Approx(mean.val().values[i]).epsilon(1e-12));
  }
}

TEST_CASE("aggregate") {
  Tape t;
  SUBCASE("equal weights give the plain mean") {
    Ref p = t.leaf(Tensor::matrix(2, 2, {0.8, 0.2, 0.4, 0.6}));
    AggregateOut out = aggregate(t, p, t.leaf(Tensor::row({1.0, 1.0})));
    CHECK(std::abs(out.prob.val().values[0] - 0.6) < 1e-12);
    CHECK(std::abs(out.prob.val().values[1] - 0.4) < 1e-12);
    CHECK_FALSE(out.fallback);
  }
  SUBCASE("degenerate weight selects a single segment") {
    Ref p = t.leaf(Tensor::matrix(2, 2, {0.8, 0.2, 0.4, 0.6}));
    AggregateOut out = aggregate(t, p, t.leaf(Tensor::row({1.0, 0.0})));
    CHECK(std::abs(out.prob.val().values[0] - 0.8) < 1e-12);
    CHECK(std::abs(out.prob.val().values[1] - 0.2) < 1e-12);
  }
  SUBCASE("weighted average of opposed distributions") {
    Ref p = t.leaf(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
    AggregateOut out = aggregate(t, p, t.leaf(Tensor::row({0.2, 0.6})));
    CHECK(std::abs(out.prob.val().values[0] - 0.25) < 1e-12);
    CHECK(std::abs(out.prob.val().values[1] - 0.75) < 1e-12);
  }
  SUBCASE("all-zero weights fall back to the uniform average with a flag") {
    Ref p = t.leaf(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
    AggregateOut out = aggregate(t, p, t.leaf(Tensor::row({0.0, 0.0})));
    CHECK(out.fallback);
    CHECK(out.prob.val().values[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("preserves the simplex for random convex inputs") {
    Rng rng(8);
    for (int round = 0; round < 25; ++round) {
      int m = 1 + rng.uniform_int(6);
      Tensor probs = Tensor::zeros({m, 3});
      for (int i = 0; i < m; ++i) {
        double total = 0.0;
        for (int j = 0; j < 3; ++j) total += (probs.at2(i, j) = rng.uniform(0.01, 1.0));
        for (int j = 0; j < 3; ++j) probs.at2(i, j) /= total;
      }
      Tensor alpha = Tensor::zeros({m});
      for (double& v : alpha.values) v = rng.uniform(0.0, 1.0);
      Tape local;
      AggregateOut out = aggregate(local, local.leaf(probs), local.leaf(alpha));
      double total = 0.0;
      for (double v : out.prob.val().values) total += v;
      if (!out.fallback) CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("forward_review") {
  Vocabulary vocab = tiny_vocab();
  Review two_seg = review("r1", 2, {seg({"got", "sick", "after"}), seg({"service", "was", "fine"})});
  Review one_seg = review("r2", 1, {seg({"food", "was", "great"})});

  for (const char* kind : {"mil-avg", "mil-softmax", "mil-sigmoid"}) {
    ModelSpec spec = tiny_spec(kind);
    MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 21), 21);

    ReviewPrediction single = model.forward_review(one_seg);
    for (size_t c = 0; c < 2; ++c)
      CHECK(single.review_prob[c] == doctest::Approx(single.segment_probs[0][c]).epsilon(1e-12));

    ReviewPrediction pred = model.forward_review(two_seg);
    CHECK(pred.segment_probs.size() == 2);
    CHECK(pred.alpha.size() == 2);
    double total = 0.0;
    for (double v : pred.review_prob) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (double a : pred.alpha) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
    if (spec.aggregation() == Aggregation::kUniform) {
      for (size_t c = 0; c < 2; ++c)
        CHECK(pred.review_prob[c] ==
              doctest::Approx((pred.segment_probs[0][c] + pred.segment_probs[1][c]) / 2).epsilon(1e-12));
      CHECK(pred.alpha[0] == 0.5);  // the true aggregation weight, used for gating
    }
    if (spec.aggregation() == Aggregation::kSoftmax)
      CHECK(pred.alpha[0] + pred.alpha[1] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("padded forward matches the unpadded pass and zeroes padding attention") {
  Vocabulary vocab = tiny_vocab();
  Review r = review("r1", 2, {seg({"got", "sick"}), seg({"service", "was", "slow"}), seg({"food", "fine"})});
  for (const char* kind : {"mil-avg", "mil-sigmoid", "mil-softmax"}) {
    ModelSpec spec = tiny_spec(kind);
    MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 33), 33);
    ReviewPrediction plain = model.forward_review(r);
    ReviewPrediction padded = model.forward_review_padded(r, 5);
    REQUIRE(padded.alpha.size() == 5);
    for (size_t i = 0; i < 3; ++i) {
      CHECK(padded.alpha[i] == plain.alpha[i]);
      CHECK(padded.segment_probs[i] == plain.segment_probs[i]);
    }
    CHECK(padded.review_prob == plain.review_prob);
    CHECK(padded.alpha[3] == 0.0);
    CHECK(padded.alpha[4] == 0.0);
  }
}

TEST_CASE("segment calls") {
  SUBCASE("argmax with ties toward the lower class index") {
    CHECK(argmax_label({0.9, 0.1}) == 1);
    CHECK(argmax_label({0.1, 0.9}) == 2);
    CHECK(argmax_label({0.5, 0.5}) == 1);
  }
  SUBCASE("labels are invariant under positive rescaling of the classifier") {
    Vocabulary vocab = tiny_vocab();
    ModelSpec spec = tiny_spec("mil-sigmoid", 3);
    MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 5), 5);
    Review r = review("r1", 2, {seg({"got", "sick"}), seg({"food", "was", "great"}), seg({"service", "slow"})});
    auto calls_before = segment_calls(model.forward_review(r));
    for (double& v : model.params().at("clf.W").tensor.values) v *= 3.0;
    for (double& v : model.params().at("clf.b").tensor.values) v *= 3.0;
    auto calls_after = segment_calls(model.forward_review(r));
    for (size_t i = 0; i < calls_before.size(); ++i) CHECK(calls_before[i].label == calls_after[i].label);
  }
}

TEST_CASE("end-to-end gradients match finite differences on a 2-review fixture") {
  Vocabulary vocab = tiny_vocab();
  ModelSpec spec = tiny_spec("mil-sigmoid");
  MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 55), 55);

  std::vector<Review> fixture = {
      review("r1", 2, {seg({"got", "sick", "after"}), seg({"food", "was", "great"}), seg({"service", "slow"})}),
      review("r2", 1, {seg({"food", "was", "fine"}), seg({"great", "service"}), seg({"was", "fine", "after"})})};
  std::vector<int> labels = {2, 1};
  std::vector<double> weights = {1.0, 1.5};

  auto build_loss = [&](Tape& t) {
    RefMap refs = t.params(model.params());
    Rng rng(1);
    std::vector<Ref> probs;
    for (const Review& r : fixture) probs.push_back(model.review_prob_graph(t, refs, r, Mode::kEval, rng));
    return nll_loss_graph(t, probs, labels, weights, refs.at("clf.W"), 1e-4);
  };

  Tape t;
  Ref loss = build_loss(t);
  GradMap grads = t.backward(loss, model.params());
  auto loss_value = [&]() {
    Tape fresh;
    return build_loss(fresh).val().item();
  };
  Rng pick(97);
  auto rep = miltext::testing::fd_check(model.params(), loss_value, grads, 60, pick);
  CHECK(rep.checked >= 50);
  CHECK_MESSAGE(rep.max_rel_err <= 1e-4, rep.worst);
}

TEST_CASE("model checkpoints round-trip through the sidecar") {
  Vocabulary vocab = tiny_vocab();
  ModelSpec spec = tiny_spec("mil-softmax", 3);
  MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 77), 77);
  Review r = review("r1", 2, {seg({"got", "sick"}), seg({"food", "great"})});
  ReviewPrediction before = model.forward_review(r);

  save_model("t_model.bin", model);
  auto loaded = load_model("t_model.bin");
  CHECK(loaded->spec().kind == "mil-softmax");
  ReviewPrediction after = loaded->forward_review(r);
  CHECK(before.review_prob == after.review_prob);
  CHECK(before.alpha == after.alpha);
  std::remove("t_model.bin");
  std::remove("t_model.bin.meta.json");
}

TEST_CASE("sigmoid model on a fixed fixture matches the recorded golden prediction") {
  Vocabulary vocab = tiny_vocab();
  ModelSpec spec = tiny_spec("mil-sigmoid");
  MilModel model(spec, vocab, tiny_embeddings(vocab, spec.emb_dim, 123), 123);
  Review r = review("golden", 2, {seg({"got", "sick", "after"}), seg({"food", "was", "great"})});
  ReviewPrediction pred = model.forward_review(r);

  const char* golden_path = "data/golden_review_prediction.json";
  if (std::getenv("MILTEXT_WRITE_GOLDEN")) {
    json j;
    j["review_prob"] = pred.review_prob;
    j["segment_probs"] = pred.segment_probs;
    j["alpha"] = pred.alpha;
    j["scores"] = pred.scores;
    std::ofstream os(golden_path);
    os << j.dump(2) << '\n';
    return;
  }
  std::ifstream is(golden_path);
  REQUIRE_MESSAGE(is.good(), "golden file missing; run with MILTEXT_WRITE_GOLDEN=1 from tests/");
  json j = json::parse(is);
  auto expect_close = [](const std::vector<double>& got, const std::vector<double>& want) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  };
  expect_close(pred.review_prob, j["review_prob"].get<std::vector<double>>());
  expect_close(pred.alpha, j["alpha"].get<std::vector<double>>());
  expect_close(pred.scores, j["scores"].get<std::vector<double>>());
  auto want_probs = j["segment_probs"].get<std::vector<std::vector<double>>>();
  REQUIRE(want_probs.size() == pred.segment_probs.size());
  for (size_t i = 0; i < want_probs.size(); ++i) expect_close(pred.segment_probs[i], want_probs[i]);
}
