#pragma once

#include <string>
#include <vector>

#include "miltext/corpus.hpp"
#include "miltext/models.hpp"

namespace miltext {

struct HighlightedReview {
  const Review* review = nullptr;
  ReviewPrediction prediction;
};

// Per segment: predicted label, attention weight, and the raw text,
// highlighted when the attention weight exceeds the threshold.
std::string render_highlights_ansi(const std::vector<HighlightedReview>& items, double threshold);

// Standalone static page; all review text is escaped, highlighting is done
// with class attributes only.
std::string render_highlights_html(const std::vector<HighlightedReview>& items, double threshold);

std::string html_escape(const std::string& text);

}  // namespace miltext
