#include "miltext/highlight.hpp"

#include <cstdio>

namespace miltext {

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string html_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_highlights_ansi(const std::vector<HighlightedReview>& items, double threshold) {
  std::string out;
  for (const HighlightedReview& item : items) {
    out += "== review " + item.review->id + " (label " + std::to_string(item.review->label) + ")\n";
    auto calls = segment_calls(item.prediction);
    for (size_t i = 0; i < item.review->segments.size(); ++i) {
      bool hot = item.prediction.alpha[i] > threshold;
      out += "  [pred " + std::to_string(calls[i].label) + " att " + fmt3(item.prediction.alpha[i]) + "] ";
      if (hot) out += "\x1b[31m";
      out += item.review->segments[i].raw_text;
      if (hot) out += "\x1b[0m";
      out += '\n';
    }
  }
  return out;
}

std::string render_highlights_html(const std::vector<HighlightedReview>& items, double threshold) {
  std::string out;
  out +=
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>attention highlights</title>\n"
      "<style>\nbody { font-family: sans-serif; margin: 2em; }\n"
      ".review { margin-bottom: 1.5em; }\n"
      ".review h2 { font-size: 1em; }\n"
      ".seg { margin: 0.2em 0; }\n"
      ".hl { background: #ffd2d2; }\n"
      ".meta { color: #666; font-size: 0.85em; margin-right: 0.5em; }\n"
      "</style>\n</head>\n<body>\n";
  for (const HighlightedReview& item : items) {
    out += "<div class=\"review\">\n<h2>review " + html_escape(item.review->id) + " (label " +
           std::to_string(item.review->label) + ")</h2>\n";
    auto calls = segment_calls(item.prediction);
    for (size_t i = 0; i < item.review->segments.size(); ++i) {
      bool hot = item.prediction.alpha[i] > threshold;
      out += "<div class=\"seg\"><span class=\"meta\">pred " + std::to_string(calls[i].label) + " att " +
             fmt3(item.prediction.alpha[i]) + "</span>";
      out += hot ? "<span class=\"hl\">" : "<span>";
      out += html_escape(item.review->segments[i].raw_text);
      out += "</span></div>\n";
    }
    out += "</div>\n";
  }
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace miltext
