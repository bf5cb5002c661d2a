#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace sgcap {

using Tokens = std::vector<std::string>;

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // nonempty
};

// Corpus BLEU-n (n in 1..4): clipped n-gram precision summed over the corpus,
// geometric mean over orders 1..n, brevity penalty against the closest
// reference length (shorter wins ties). Unsmoothed: any zero precision gives 0.
double bleu(std::span<const EvalPair> pairs, int n);

// ROUGE-L with beta = 1.2: per pair, LCS precision and recall each maximized
// over references, combined into F_beta; averaged over pairs.
double rouge_l(std::span<const EvalPair> pairs);

inline constexpr double kCiderSigma = 6.0;

// CIDEr-D: TF-IDF n-gram vectors (n = 1..4, document frequency over each
// pair's reference set), clipped cosine against each reference with a
// Gaussian length penalty (sigma 6), averaged over orders and references,
// scaled by 10, averaged over pairs. Needs at least two pairs.
double cider_d(std::span<const EvalPair> pairs);

struct MetricReport {
  double bleu[4] = {0, 0, 0, 0};
  double rouge_l = 0.0;
  double cider_d = 0.0;
};

MetricReport evaluate_all(std::span<const EvalPair> pairs);

// Joins candidates to references by video id. Candidates without references
// are an error; references without candidates are ignored.
std::vector<EvalPair> join_by_id(const std::map<std::string, std::string>& candidates,
                                 const std::multimap<std::string, std::string>& references);

}  // namespace sgcap
