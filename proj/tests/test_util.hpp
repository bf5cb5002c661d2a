#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"

namespace sgcap::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("sgcap_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {"man",  "woman", "dog",  "cat",   "play",  "run",
                                                  "cook", "car",   "ball", "piano", "guitar", "eat"};
  return words;
}

// Random bank: Gaussian embeddings, random token subsets of a small pool.
inline SentenceBank random_bank(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::bernoulli_distribution pick(0.3);
  std::vector<SentenceRecord> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    SentenceRecord r;
    r.text = "sentence " + std::to_string(i);
    for (const auto& w : word_pool())
      if (pick(rng)) r.tokens.push_back(w);
    for (std::size_t j = 0; j < d; ++j) r.embedding.push_back(normal(rng));
    corpus.push_back(std::move(r));
  }
  return build_bank(std::move(corpus));
}

inline SentenceRecord record(std::string text, std::vector<std::string> tokens, std::vector<float> emb) {
  return SentenceRecord{std::move(text), std::move(tokens), std::move(emb)};
}

}  // namespace sgcap::testing
