#include "miltext/vocab.hpp"

#include <fstream>
#include <sstream>

#include "miltext/rng.hpp"

namespace miltext {

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
    throw Error("Vocabulary: token list must start with reserved <pad>, <unk>");
  for (std::string& t : tokens) add(t);
}

Vocabulary Vocabulary::build(const Corpus& corpus) {
  Vocabulary v;
  for (const Review& r : corpus.reviews)
    for (const Segment& s : r.segments)
      for (const std::string& t : s.tokens) v.add(t);
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  index_[token] = id;
  tokens_.push_back(token);
  return id;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) != 0; }

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(index(t));
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  };
  for (const std::string& t : tokens_) {
    for (char c : t) mix(c);
    mix('\n');
  }
  return h;
}

Tensor init_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
  if (dim <= 0) throw Error("init_embeddings: dim must be positive");
  Rng rng(Rng::mix(seed, 0x456d62ULL));
  Tensor table = Tensor::zeros({vocab.size(), dim});
  for (int row = 1; row < vocab.size(); ++row)  // row 0 is padding, kept zero
    for (int j = 0; j < dim; ++j) table.at2(row, j) = rng.uniform(-0.25, 0.25);
  return table;
}

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, int dim, std::uint64_t seed) {
  std::ifstream is(path);
  if (!is) throw Error("load_embeddings: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(is, line)) throw Error("load_embeddings: empty file '" + path + "'");
  std::istringstream header(line);
  long long file_vocab = 0, file_dim = 0;
  if (!(header >> file_vocab >> file_dim)) throw Error("load_embeddings: malformed header '" + line + "'");
  if (file_dim != dim)
    throw Error("load_embeddings: file dimension " + std::to_string(file_dim) + " does not match configured " +
                std::to_string(dim));

  std::vector<std::vector<double>> rows(static_cast<size_t>(vocab.size()));
  size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) throw Error("load_embeddings: line " + std::to_string(line_no) + ": missing token");
    std::vector<double> vec(static_cast<size_t>(dim));
    for (int j = 0; j < dim; ++j)
      if (!(ls >> vec[static_cast<size_t>(j)]))
        throw Error("load_embeddings: line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                    " values for token '" + token + "'");
    double extra;
    if (ls >> extra) throw Error("load_embeddings: line " + std::to_string(line_no) + ": too many values");
    if (vocab.contains(token)) rows[static_cast<size_t>(vocab.index(token))] = std::move(vec);
  }

  Rng rng(Rng::mix(seed, 0x456d62ULL));
  Tensor table = Tensor::zeros({vocab.size(), dim});
  for (int row = 1; row < vocab.size(); ++row) {
    auto& src = rows[static_cast<size_t>(row)];
    if (src.empty()) {
      for (int j = 0; j < dim; ++j) table.at2(row, j) = rng.uniform(-0.25, 0.25);
    } else {
      for (int j = 0; j < dim; ++j) table.at2(row, j) = src[static_cast<size_t>(j)];
    }
  }
  return table;
}

}  // namespace miltext
