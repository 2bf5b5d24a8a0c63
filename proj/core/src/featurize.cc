// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>

#include "rankserve/workload.h"
#include "util.h"

namespace rankserve {

namespace {

template <typename Fn>
void for_each_token(std::string_view text, std::size_t limit, Fn&& fn) {
  std::size_t i = 0;
  std::size_t seen = 0;
  while (i < text.size() && seen < limit) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    fn(text.substr(start, i - start));
    ++seen;
  }
}

// Lowercased token with leading/trailing punctuation removed.
std::string normalize(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
  std::string out(token.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const std::vector<std::string>& feature_keywords() {
  static const std::vector<std::string> keywords = {
      "list",     "explain", "write", "code",  "summarize",
      "describe", "translate", "yes", "no",    "story",
      "essay",    "function", "brief", "detail", "step"};
  return keywords;
}

std::size_t FeatureLayout::keyword_index(std::string_view keyword) {
  const auto& kw = feature_keywords();
  const auto it = std::find(kw.begin(), kw.end(), keyword);
  return it == kw.end() ? dimension()
                        : kKeywordBegin + static_cast<std::size_t>(it - kw.begin());
}

std::size_t FeatureLayout::hash_begin() {
  return kKeywordBegin + feature_keywords().size();
}

std::size_t FeatureLayout::dimension() { return hash_begin() + kHashBuckets; }

std::int64_t count_prompt_tokens(std::string_view prompt) {
  std::int64_t n = 0;
  for_each_token(prompt, static_cast<std::size_t>(-1), [&](std::string_view) { ++n; });
  return n;
}

std::vector<double> featurize(std::string_view prompt) {
  std::vector<double> f(FeatureLayout::dimension(), 0.0);
  const auto& keywords = feature_keywords();
  const std::size_t hash_begin = FeatureLayout::hash_begin();

  double tokens = 0.0;
  double chars = 0.0;
  bool question = false;
  for_each_token(prompt, kMaxPromptTokens, [&](std::string_view token) {
    tokens += 1.0;
    chars += static_cast<double>(token.size());
    if (token.find('?') != std::string_view::npos) question = true;
    const auto word = normalize(token);
    if (word.empty()) return;
    const auto it = std::find(keywords.begin(), keywords.end(), word);
    if (it != keywords.end()) {
      f[FeatureLayout::kKeywordBegin + static_cast<std::size_t>(it - keywords.begin())] += 1.0;
    }
    const auto h = util::fnv1a(word, util::kFnvOffset ^ kFeatureHashSeed);
    f[hash_begin + h % kHashBuckets] += 1.0;
  });

  f[FeatureLayout::kTokenCount] = tokens;
  f[FeatureLayout::kLogTokenCount] = std::log1p(tokens);
  f[FeatureLayout::kCharCount] = chars;
  f[FeatureLayout::kQuestionMark] = question ? 1.0 : 0.0;
  return f;
}

}  // namespace rankserve
