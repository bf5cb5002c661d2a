#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sgcap/text.hpp"

namespace sgcap {

// Candidate ground truths for one training caption: index 0 is the caption
// itself (raw score lambda), followed by the k group sentences scored by
// their hybrid retrieval score. probs = softmax(raw_scores).
struct SupervisionTarget {
  std::vector<std::vector<TokenId>> candidates;
  std::vector<double> raw_scores;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
};

enum class LossMode {
  kMixture,  // sum_i probs[i] * CE_i
  kSampled,  // CE of one candidate drawn from probs
};

LossMode parse_loss_mode(std::string_view name);
std::string_view to_string(LossMode mode);

// Max-shifted softmax in double precision.
std::vector<double> softmax(std::span<const double> scores);

// Throws ConfigError if lambda <= 0, any score is non-finite, or the token
// and score lists disagree in length.
SupervisionTarget build_target(std::vector<TokenId> caption_tokens,
                               std::vector<std::vector<TokenId>> group_tokens,
                               std::span<const double> group_scores, double lambda);

// Draws a candidate index with probability probs[index]; deterministic per seed.
std::size_t sample_target(const SupervisionTarget& target, std::uint64_t seed);

// Probability-weighted supervision loss. In sampled mode the drawn index is
// written to *picked when non-null. Throws ConfigError on a length mismatch.
double pss_loss(std::span<const double> per_candidate_ce, const SupervisionTarget& target,
                LossMode mode, std::uint64_t seed, std::size_t* picked = nullptr);

// d loss / d CE_i: probs in mixture mode, a one-hot of the drawn index otherwise.
std::vector<double> pss_loss_weights(const SupervisionTarget& target, LossMode mode,
                                     std::uint64_t seed);

}  // namespace sgcap
