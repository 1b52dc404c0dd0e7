// SPDX-License-Identifier: Apache-2.0
#include "setsdb/text.hpp"

#include <array>
#include <cctype>

namespace setsdb {

namespace {

constexpr std::array<std::string_view, 24> kStopWords = {
    "a",  "an", "and", "are", "as",   "at",  "by",   "for", "from", "in",   "is",   "it",
    "of", "on", "or",  "the", "that", "its", "this", "to",  "was",  "with", "which", "be"};

bool is_stop_word(std::string_view w) {
  for (auto s : kStopWords) {
    if (s == w) return true;
  }
  return false;
}

}  // namespace

std::string normalize_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

void add_keywords(KeywordSet& into, std::string_view text) {
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !is_stop_word(current)) into.insert(current);
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
}

KeywordSet extract_keywords(std::string_view text) {
  KeywordSet out;
  add_keywords(out, text);
  return out;
}

}  // namespace setsdb
