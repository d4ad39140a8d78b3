#include "miltext/corpus.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "miltext/text.hpp"

namespace miltext {

using nlohmann::json;

namespace {

[[noreturn]] void line_error(size_t line_no, const std::string& what) {
  throw Error("load_corpus: line " + std::to_string(line_no) + ": " + what);
}

int checked_label(const json& v, int num_classes, size_t line_no, const char* field) {
  if (!v.is_number_integer()) line_error(line_no, std::string(field) + " must be an integer");
  int label = v.get<int>();
  if (label < 1 || label > num_classes)
    line_error(line_no, std::string(field) + " " + std::to_string(label) + " outside [1.." +
                            std::to_string(num_classes) + "]");
  return label;
}

}  // namespace

Corpus load_corpus(const std::string& path, int num_classes, const std::string& split) {
  if (num_classes < 2) throw Error("load_corpus: num_classes must be at least 2");
  std::ifstream is(path);
  if (!is) throw Error("load_corpus: cannot open '" + path + "'");

  Corpus corpus;
  corpus.num_classes = num_classes;
  corpus.split = split;

  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      line_error(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) line_error(line_no, "expected a JSON object");

    Review review;
    if (!obj.contains("id") || !obj["id"].is_string()) line_error(line_no, "missing string field 'id'");
    review.id = obj["id"].get<std::string>();
    if (!obj.contains("label")) line_error(line_no, "missing field 'label'");
    review.label = checked_label(obj["label"], num_classes, line_no, "label");
    if (obj.contains("sample_weight")) {
      if (!obj["sample_weight"].is_number()) line_error(line_no, "sample_weight must be a number");
      review.sample_weight = obj["sample_weight"].get<double>();
      if (review.sample_weight < 0.0) line_error(line_no, "sample_weight must be nonnegative");
    }

    if (obj.contains("segments")) {
      if (!obj["segments"].is_array() || obj["segments"].empty())
        line_error(line_no, "'segments' must be a nonempty array");
      for (const json& seg : obj["segments"]) {
        if (!seg.is_object() || !seg.contains("text") || !seg["text"].is_string())
          line_error(line_no, "each segment needs a string 'text'");
        Segment s;
        s.raw_text = seg["text"].get<std::string>();
        s.tokens = tokenize(s.raw_text);
        if (s.tokens.empty()) line_error(line_no, "segment text has no tokens: '" + s.raw_text + "'");
        if (seg.contains("gold_label")) s.gold_label = checked_label(seg["gold_label"], num_classes, line_no, "gold_label");
        review.segments.push_back(std::move(s));
      }
    } else if (obj.contains("text")) {
      if (!obj["text"].is_string()) line_error(line_no, "'text' must be a string");
      std::vector<SentencePiece> pieces;
      try {
        pieces = segment_sentences(obj["text"].get<std::string>());
      } catch (const Error& e) {
        line_error(line_no, e.what());
      }
      for (SentencePiece& p : pieces) review.segments.push_back(Segment{std::move(p.tokens), std::move(p.raw_text), std::nullopt});
    } else {
      line_error(line_no, "review needs either 'segments' or 'text'");
    }
    corpus.reviews.push_back(std::move(review));
  }
  if (corpus.reviews.empty()) throw Error("load_corpus: empty corpus in '" + path + "'");
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw Error("save_corpus: cannot open '" + tmp + "'");
    for (const Review& r : corpus.reviews) {
      json obj;
      obj["id"] = r.id;
      obj["label"] = r.label;
      if (r.sample_weight != 1.0) obj["sample_weight"] = r.sample_weight;
      json segs = json::array();
      for (const Segment& s : r.segments) {
        json seg;
        seg["text"] = s.raw_text;
        if (s.gold_label) seg["gold_label"] = *s.gold_label;
        segs.push_back(std::move(seg));
      }
      obj["segments"] = std::move(segs);
      os << obj.dump() << '\n';
    }
    if (!os) throw Error("save_corpus: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("save_corpus: cannot rename '" + tmp + "' to '" + path + "'");
}

std::map<int, ClassStats> corpus_stats(const Corpus& corpus) {
  long long total_segments = 0;
  std::map<int, long long> gold_counts;
  std::map<int, ClassStats> stats;
  for (const Review& r : corpus.reviews) {
    ClassStats& cs = stats[r.label];
    ++cs.reviews;
    for (const Segment& s : r.segments) {
      if (!s.gold_label) throw Error("corpus_stats: segment without gold label in review '" + r.id + "'");
      ++total_segments;
      ++gold_counts[*s.gold_label];
      ++cs.segments_in_class_reviews;
      if (*s.gold_label == r.label) ++cs.witness_segments;
    }
  }
  if (total_segments == 0) throw Error("corpus_stats: empty corpus");
  for (auto& [label, cs] : stats) {
    cs.segment_share = static_cast<double>(gold_counts.count(label) ? gold_counts[label] : 0) / total_segments;
    cs.witness = static_cast<double>(cs.witness_segments) / cs.reviews;
    cs.wr = cs.segments_in_class_reviews > 0
                ? static_cast<double>(cs.witness_segments) / cs.segments_in_class_reviews
                : 0.0;
  }
  return stats;
}

}  // namespace miltext
