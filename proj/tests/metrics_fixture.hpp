#pragma once

#include <string>
#include <vector>

#include "sgcap/metrics.hpp"
#include "sgcap/text.hpp"

namespace sgcap::testing {

// Five-pair corpus with values frozen from the coco-caption reference scorer
// (whitespace tokens, no punctuation, so tokenization cannot differ).
inline std::vector<EvalPair> five_pair_corpus() {
  const std::vector<std::pair<std::string, std::vector<std::string>>> raw = {
      {"a man is playing a guitar",
       {"a man plays the guitar", "a person is playing a guitar on stage", "man playing guitar"}},
      {"a dog runs in the park", {"a dog is running through the park", "the dog runs on grass"}},
      {"the woman cooks food in a kitchen",
       {"a woman is cooking in the kitchen", "someone prepares food", "a lady cooks dinner in a kitchen"}},
      {"a cat sleeps on the bed", {"a cat is sleeping on a bed", "the kitten naps"}},
      {"two people ride bikes",
       {"two people are riding bicycles", "a couple rides bikes down the road", "people cycling"}},
  };
  std::vector<EvalPair> pairs;
  for (const auto& [cand, refs] : raw) {
    EvalPair p{tokenize_words(cand), {}};
    for (const auto& r : refs) p.references.push_back(tokenize_words(r));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline constexpr double kFiveBleu[4] = {0.8965517240760997, 0.641030061830375, 0.4018291904318517,
                                        0.2609150333209629};
inline constexpr double kFiveRougeL = 0.6419202687859403;
inline constexpr double kFiveCiderD = 1.7320407076624007;

}  // namespace sgcap::testing
