#include "sgcap/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "sgcap/error.hpp"

namespace sgcap {

namespace {

constexpr std::array<std::string_view, 4> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>"};

constexpr std::array<std::string_view, 48> kStopwords = {
    "a",    "an",   "the",  "is",    "are",  "was",   "were", "be",   "been", "being",
    "am",   "and",  "or",   "but",   "of",   "in",    "on",   "at",   "to",   "for",
    "with", "by",   "from", "as",    "it",   "its",   "this", "that", "these", "those",
    "he",   "she",  "they", "his",   "her",  "their", "them", "him",  "while", "into",
    "up",   "down", "out",  "there", "some", "very",  "then", "who"};

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> heuristic_content_tokens(std::string_view text) {
  auto words = tokenize_words(text);
  std::erase_if(words, [](const std::string& w) {
    return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
  });
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

Vocabulary::Vocabulary() {
  for (auto r : kReserved) {
    index_.emplace(std::string(r), static_cast<TokenId>(words_.size()));
    words_.emplace_back(r);
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (auto& w : tokenize_words(t)) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (auto& [w, c] : ranked)
    if (c >= min_count) words.push_back(w);
  return from_words(std::move(words));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  for (auto& w : words) {
    if (w.empty()) throw FormatError("vocabulary: empty word");
    if (v.index_.contains(w)) throw FormatError("vocabulary: duplicate word '" + w + "'");
    v.index_.emplace(w, static_cast<TokenId>(v.words_.size()));
    v.words_.push_back(std::move(w));
  }
  return v;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw ConfigError("token id out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : tokenize_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (t < static_cast<TokenId>(kReserved.size())) continue;
    if (!out.empty()) out.push_back(' ');
    out += word(t);
  }
  return out;
}

}  // namespace sgcap
