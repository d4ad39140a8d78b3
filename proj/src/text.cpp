#include "miltext/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "miltext/tensor.hpp"

namespace miltext {

namespace {

bool is_alnum(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

const std::array<const char*, 18> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "fig", "no", "al", "dept", "est",
};

bool guarded_abbreviation(const std::string& text, size_t dot) {
  // Word immediately before the dot, lowercased.
  size_t end = dot;
  size_t begin = end;
  while (begin > 0 && is_alnum(text[begin - 1])) --begin;
  if (begin == end) return false;
  std::string word;
  for (size_t i = begin; i < end; ++i) word += to_lower(text[i]);
  if (word.size() == 1 && !std::isdigit(static_cast<unsigned char>(word[0]))) return true;  // initials, e.g., i.e.
  return std::find_if(kAbbreviations.begin(), kAbbreviations.end(),
                      [&](const char* a) { return word == a; }) != kAbbreviations.end();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (is_alnum(c)) {
      cur += to_lower(c);
    } else if (c == '\'' && !cur.empty() && i + 1 < text.size() && is_alnum(text[i + 1])) {
      cur += c;  // contraction apostrophe
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}

std::vector<SentencePiece> segment_sentences(const std::string& text) {
  std::string trimmed = normalize_whitespace(text);
  if (trimmed.empty()) throw Error("segment_sentences: text has no tokens");

  std::vector<std::string> pieces;
  size_t start = 0;
  size_t i = 0;
  while (i < trimmed.size()) {
    char c = trimmed[i];
    if (c == '.' || c == '!' || c == '?') {
      size_t punct = i;
      size_t end = i;
      while (end + 1 < trimmed.size() &&
             (trimmed[end + 1] == '.' || trimmed[end + 1] == '!' || trimmed[end + 1] == '?' ||
              trimmed[end + 1] == '"' || trimmed[end + 1] == '\''))
        ++end;
      bool at_eot = end + 1 >= trimmed.size();
      bool boundary = false;
      if (at_eot) {
        boundary = true;
      } else if (is_space(trimmed[end + 1])) {
        size_t next = end + 1;
        while (next < trimmed.size() && is_space(trimmed[next])) ++next;
        boundary = next < trimmed.size() && is_upper(trimmed[next]);
      }
      if (boundary && c == '.' && punct == end && guarded_abbreviation(trimmed, punct)) boundary = false;
      if (boundary) {
        pieces.push_back(trimmed.substr(start, end + 1 - start));
        start = end + 1;
        while (start < trimmed.size() && is_space(trimmed[start])) ++start;
        i = start;
        continue;
      }
      i = end + 1;
      continue;
    }
    ++i;
  }
  if (start < trimmed.size()) pieces.push_back(trimmed.substr(start));

  // Merge token-free pieces into a neighbour so no characters are dropped.
  std::vector<SentencePiece> out;
  std::string carry;
  for (const std::string& piece : pieces) {
    std::vector<std::string> tokens = tokenize(piece);
    if (tokens.empty()) {
      if (!out.empty()) {
        out.back().raw_text += " " + piece;
      } else {
        carry += carry.empty() ? piece : " " + piece;
      }
      continue;
    }
    SentencePiece sp;
    sp.raw_text = carry.empty() ? piece : carry + " " + piece;
    carry.clear();
    sp.tokens = std::move(tokens);
    out.push_back(std::move(sp));
  }
  if (out.empty()) throw Error("segment_sentences: text has no tokens");
  return out;
}

}  // namespace miltext
