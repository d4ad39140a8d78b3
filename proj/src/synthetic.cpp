#include "miltext/synthetic.hpp"

#include <cmath>

#include "miltext/rng.hpp"

namespace miltext {

namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw Error("generate_synthetic: num_classes must be at least 2");
  if (spec.witness_rate <= 0.0 || spec.witness_rate > 1.0)
    throw Error("generate_synthetic: witness rate must be in (0,1], got " + std::to_string(spec.witness_rate));
  if (spec.min_segments < 1 || spec.max_segments < spec.min_segments)
    throw Error("generate_synthetic: bad segments-per-review range");
  if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
    throw Error("generate_synthetic: bad tokens-per-segment range");
  if (spec.class_vocab_size < 1 || spec.background_vocab_size < 1)
    throw Error("generate_synthetic: vocabulary sizes must be positive");
  if (spec.noise_rate < 0.0 || spec.noise_rate >= 1.0) throw Error("generate_synthetic: noise rate must be in [0,1)");
  if (std::llround(spec.witness_rate * spec.min_segments) < 1)
    throw Error("generate_synthetic: witness rate " + std::to_string(spec.witness_rate) +
                " infeasible for reviews with " + std::to_string(spec.min_segments) + " segments");
}

std::string background_token(int i) { return "w" + std::to_string(i); }
std::string class_token(int cls, int i) { return "c" + std::to_string(cls) + "t" + std::to_string(i); }

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Corpus generate_split(const SyntheticSpec& spec, const std::string& split, int count, bool gold_labels,
                      std::uint64_t stream) {
  Rng rng(Rng::mix(spec.seed, stream));
  Corpus corpus;
  corpus.num_classes = spec.num_classes;
  corpus.split = split;
  corpus.reviews.reserve(static_cast<size_t>(count));

  for (int n = 0; n < count; ++n) {
    Review r;
    r.id = split + "-" + std::to_string(n);
    r.label = 1 + rng.uniform_int(spec.num_classes);
    int m = spec.min_segments + rng.uniform_int(spec.max_segments - spec.min_segments + 1);

    std::vector<bool> witness(static_cast<size_t>(m), false);
    if (r.label > 1) {
      int w = static_cast<int>(std::llround(spec.witness_rate * m));
      w = std::max(1, std::min(w, m));
      std::vector<int> order(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) order[static_cast<size_t>(i)] = i;
      rng.shuffle(order);
      for (int i = 0; i < w; ++i) witness[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
    }

    for (int si = 0; si < m; ++si) {
      Segment s;
      int len = spec.min_tokens + rng.uniform_int(spec.max_tokens - spec.min_tokens + 1);
      bool is_witness = witness[static_cast<size_t>(si)];
      for (int ti = 0; ti < len; ++ti) {
        if (is_witness && !rng.bernoulli(spec.noise_rate))
          s.tokens.push_back(class_token(r.label, rng.uniform_int(spec.class_vocab_size)));
        else
          s.tokens.push_back(background_token(rng.uniform_int(spec.background_vocab_size)));
      }
      s.raw_text = join(s.tokens);
      if (gold_labels) s.gold_label = is_witness ? r.label : 1;
      r.segments.push_back(std::move(s));
    }
    corpus.reviews.push_back(std::move(r));
  }
  return corpus;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticCorpus out;
  out.train = generate_split(spec, "train", spec.train_reviews, false, 1);
  out.val = generate_split(spec, "val", spec.val_reviews, false, 2);
  out.test = generate_split(spec, "test", spec.test_reviews, true, 3);
  return out;
}

}  // namespace miltext
