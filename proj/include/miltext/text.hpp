#pragma once

#include <string>
#include <vector>

namespace miltext {

// Lowercases and splits on non-alphanumeric boundaries. An apostrophe
// between alphanumerics stays inside its token, so contractions survive.
std::vector<std::string> tokenize(const std::string& text);

// Rule-based sentence splitter: a boundary is sentence-final punctuation
// (., !, ?) followed by whitespace and a capital letter, or end-of-text.
// A dot is not a boundary after a known abbreviation or a single letter.
// Pieces without any token are merged into their neighbour so every
// returned piece carries at least one token.
struct SentencePiece {
  std::string raw_text;
  std::vector<std::string> tokens;
};
std::vector<SentencePiece> segment_sentences(const std::string& text);

// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_whitespace(const std::string& text);

}  // namespace miltext
