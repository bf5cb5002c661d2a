#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sgcap {

using TokenId = std::int32_t;

// Lowercase, replace ASCII punctuation with spaces, split on whitespace.
// Shared by the decoder vocabulary and the caption metrics so both see the
// same word boundaries.
std::vector<std::string> tokenize_words(std::string_view text);

// Fallback content-word extraction for corpora without tagger output:
// tokenize_words minus a fixed English stopword list, sorted and deduplicated.
std::vector<std::string> heuristic_content_tokens(std::string_view text);

// Word-level vocabulary with reserved PAD/BOS/EOS/UNK ids.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  Vocabulary();

  // Words with frequency >= min_count, ordered by descending count then
  // lexicographically, so the id assignment is deterministic.
  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count = 1);
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const;

  // Encodes words only; no BOS/EOS added.
  std::vector<TokenId> encode(std::string_view text) const;
  // Skips reserved ids.
  std::string decode(std::span<const TokenId> ids) const;

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace sgcap
