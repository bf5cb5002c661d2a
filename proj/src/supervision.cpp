#include "sgcap/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgcap/error.hpp"
#include "sgcap/rng.hpp"

namespace sgcap {

LossMode parse_loss_mode(std::string_view name) {
  if (name == "mixture") return LossMode::kMixture;
  if (name == "sampled") return LossMode::kSampled;
  throw ConfigError("unknown loss mode '" + std::string(name) + "' (expected mixture|sampled)");
}

std::string_view to_string(LossMode mode) {
  return mode == LossMode::kMixture ? "mixture" : "sampled";
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += out[i] = std::exp(scores[i] - mx);
  for (double& p : out) p /= z;
  return out;
}

SupervisionTarget build_target(std::vector<TokenId> caption_tokens,
                               std::vector<std::vector<TokenId>> group_tokens,
                               std::span<const double> group_scores, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
  if (group_tokens.size() != group_scores.size())
    throw ConfigError("build_target: group token and score counts differ");

  SupervisionTarget t;
  t.candidates.reserve(group_tokens.size() + 1);
  t.candidates.push_back(std::move(caption_tokens));
  t.raw_scores.push_back(lambda);
  for (std::size_t i = 0; i < group_tokens.size(); ++i) {
    if (!std::isfinite(group_scores[i])) throw ConfigError("build_target: non-finite group score");
    t.candidates.push_back(std::move(group_tokens[i]));
    t.raw_scores.push_back(group_scores[i]);
  }
  t.probs = softmax(t.raw_scores);
  return t;
}

std::size_t sample_target(const SupervisionTarget& target, std::uint64_t seed) {
  Rng rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < target.probs.size(); ++i) {
    acc += target.probs[i];
    if (u < acc) return i;
  }
  // u landed in the rounding slack above the final cumulative sum.
  for (std::size_t i = target.probs.size(); i-- > 0;)
    if (target.probs[i] > 0.0) return i;
  return 0;
}

std::vector<double> pss_loss_weights(const SupervisionTarget& target, LossMode mode,
                                     std::uint64_t seed) {
  if (mode == LossMode::kMixture) return target.probs;
  std::vector<double> w(target.size(), 0.0);
  w[sample_target(target, seed)] = 1.0;
  return w;
}

double pss_loss(std::span<const double> per_candidate_ce, const SupervisionTarget& target,
                LossMode mode, std::uint64_t seed, std::size_t* picked) {
  if (per_candidate_ce.size() != target.size())
    throw ConfigError("pss_loss: expected " + std::to_string(target.size()) +
                      " candidate losses, got " + std::to_string(per_candidate_ce.size()));
  if (mode == LossMode::kSampled) {
    const std::size_t i = sample_target(target, seed);
    if (picked) *picked = i;
    return per_candidate_ce[i];
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) loss += target.probs[i] * per_candidate_ce[i];
  return loss;
}

}  // namespace sgcap
