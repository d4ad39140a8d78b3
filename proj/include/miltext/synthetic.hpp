#pragma once

#include <cstdint>

#include "miltext/corpus.hpp"

namespace miltext {

// Controllable-witness-rate corpus generator. Class 1 is the background
// class; each class c > 1 owns an indicative vocabulary. A review of class
// c > 1 plants round(witness_rate * M) witness segments (at least one) whose
// tokens draw from the class vocabulary, with noise_rate of tokens replaced
// by background draws; the remaining segments are background. Gold segment
// labels are attached to the test split only.
struct SyntheticSpec {
  int num_classes = 2;
  int train_reviews = 2000;
  int val_reviews = 500;
  int test_reviews = 500;
  int min_segments = 6;
  int max_segments = 10;
  int min_tokens = 3;
  int max_tokens = 8;
  double witness_rate = 0.25;
  int class_vocab_size = 50;        // indicative tokens per marked class
  int background_vocab_size = 400;
  double noise_rate = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  Corpus train;
  Corpus val;
  Corpus test;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace miltext
