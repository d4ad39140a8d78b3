#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miltext/tensor.hpp"

namespace miltext {

// MIL instance: one review segment. Labels are 1-based class indices.
// gold_label is present only on annotated (test) corpora.
struct Segment {
  std::vector<std::string> tokens;
  std::string raw_text;
  std::optional<int> gold_label;
};

// MIL bag: an ordered list of segments with a single review label.
struct Review {
  std::string id;
  std::vector<Segment> segments;
  int label = 1;
  double sample_weight = 1.0;
};

struct Corpus {
  std::vector<Review> reviews;
  int num_classes = 2;
  std::string split;
};

// Reads one review per JSONL line: {"id", "label", "sample_weight"?,
// "segments": [{"text", "gold_label"?}, ...]} or {"id", "label", "text"}.
// Reviews with bare text are sentence-segmented. Labels are 1..num_classes.
Corpus load_corpus(const std::string& path, int num_classes, const std::string& split = "");

// Writes the JSONL form above (atomic rename). load_corpus(save_corpus(c))
// round-trips to an equal corpus.
void save_corpus(const std::string& path, const Corpus& corpus);

struct ClassStats {
  int reviews = 0;
  long long segments_in_class_reviews = 0;
  long long witness_segments = 0;
  double segment_share = 0.0;  // fraction of all segments carrying this gold label
  double witness = 0.0;        // mean witness segments per review of this class
  double wr = 0.0;             // witness rate
};

// Per-class witness statistics. Requires gold labels on every segment;
// classes with no reviews are absent from the result.
std::map<int, ClassStats> corpus_stats(const Corpus& corpus);

}  // namespace miltext
