#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "miltext/corpus.hpp"
#include "miltext/tensor.hpp"

namespace miltext {

// Token-to-index map with reserved slots: 0 = padding, 1 = unknown.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);  // full list including reserved slots

  // Tokens indexed in order of first appearance in the corpus.
  static Vocabulary build(const Corpus& corpus);

  int add(const std::string& token);  // existing index when already present
  int index(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> ids(const std::vector<std::string>& tokens) const;

  // FNV-1a over the token list; recorded in checkpoint sidecars so a model
  // is never applied with a different vocabulary.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// |V| x k embedding matrix. The padding row is all-zero and never receives
// gradient updates; rows missing from the pretrained file are drawn uniform
// in [-0.25, 0.25] from the run seed.
Tensor init_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed);

// word2vec text format: a "vocab_size dim" header, then one
// "token v1 ... v_dim" line per word.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, std::uint64_t seed);

}  // namespace miltext
