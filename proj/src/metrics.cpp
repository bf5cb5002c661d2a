#include "sgcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sgcap/error.hpp"
#include "sgcap/text.hpp"

namespace sgcap {

namespace {

using NgramCounts = std::map<Tokens, int>;

NgramCounts count_ngrams(const Tokens& words, int n_max) {
  NgramCounts counts;
  for (int k = 1; k <= n_max; ++k)
    for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= words.size(); ++i)
      ++counts[Tokens(words.begin() + static_cast<std::ptrdiff_t>(i),
                      words.begin() + static_cast<std::ptrdiff_t>(i) + k)];
  return counts;
}

void require_pairs(std::span<const EvalPair> pairs, const char* metric) {
  if (pairs.empty()) throw ConfigError(std::string(metric) + ": empty candidate set");
  for (const auto& p : pairs)
    if (p.references.empty()) throw ConfigError(std::string(metric) + ": pair without references");
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu(std::span<const EvalPair> pairs, int n) {
  if (n < 1 || n > 4) throw ConfigError("BLEU order must be in 1..4");
  require_pairs(pairs, "BLEU");

  std::vector<double> correct(static_cast<std::size_t>(n), 0.0), guess(static_cast<std::size_t>(n), 0.0);
  double test_len = 0.0, ref_len = 0.0;
  for (const auto& p : pairs) {
    const auto c = static_cast<double>(p.candidate.size());
    test_len += c;
    // Closest reference length; ties go to the shorter one.
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : p.references) {
      const auto l = static_cast<double>(r.size());
      if (std::abs(l - c) < std::abs(best - c) || (std::abs(l - c) == std::abs(best - c) && l < best)) best = l;
    }
    ref_len += best;

    NgramCounts max_ref;
    for (const auto& r : p.references)
      for (const auto& [g, cnt] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], cnt);
    for (const auto& [g, cnt] : count_ngrams(p.candidate, n)) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) correct[g.size() - 1] += std::min(cnt, it->second);
    }
    for (int k = 1; k <= n; ++k) guess[static_cast<std::size_t>(k - 1)] += std::max(0.0, c - k + 1);
  }

  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (guess[uk] == 0.0 || correct[uk] == 0.0) return 0.0;
    log_sum += std::log(correct[uk] / guess[uk]);
  }
  const double bp = test_len < ref_len ? std::exp(1.0 - ref_len / test_len) : 1.0;
  return bp * std::exp(log_sum / n);
}

double rouge_l(std::span<const EvalPair> pairs) {
  require_pairs(pairs, "ROUGE-L");
  constexpr double beta = 1.2;
  double total = 0.0;
  for (const auto& p : pairs) {
    double prec = 0.0, rec = 0.0;
    for (const auto& r : p.references) {
      const auto lcs = static_cast<double>(lcs_length(p.candidate, r));
      if (!p.candidate.empty()) prec = std::max(prec, lcs / static_cast<double>(p.candidate.size()));
      if (!r.empty()) rec = std::max(rec, lcs / static_cast<double>(r.size()));
    }
    if (prec > 0.0 && rec > 0.0) total += (1 + beta * beta) * prec * rec / (rec + beta * beta * prec);
  }
  return total / static_cast<double>(pairs.size());
}

namespace {

struct TfIdf {
  std::vector<std::map<Tokens, double>> vec;  // per order
  std::vector<double> norm;
  int length = 0;  // bigram count, matching the reference scorer
};

TfIdf tfidf(const Tokens& words, const std::map<Tokens, double>& df, double log_n) {
  TfIdf t;
  t.vec.resize(4);
  t.norm.assign(4, 0.0);
  for (const auto& [g, tf] : count_ngrams(words, 4)) {
    auto it = df.find(g);
    const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
    const std::size_t k = g.size() - 1;
    const double w = tf * (log_n - d);
    t.vec[k][g] = w;
    t.norm[k] += w * w;
    if (k == 1) t.length += tf;
  }
  for (double& x : t.norm) x = std::sqrt(x);
  return t;
}

}  // namespace

double cider_d(std::span<const EvalPair> pairs) {
  require_pairs(pairs, "CIDEr-D");
  if (pairs.size() < 2) throw ConfigError("CIDEr-D: needs at least two candidates for IDF");

  std::map<Tokens, double> df;
  for (const auto& p : pairs) {
    std::set<Tokens> seen;
    for (const auto& r : p.references)
      for (const auto& kv : count_ngrams(r, 4)) seen.insert(kv.first);
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(pairs.size()));

  double total = 0.0;
  for (const auto& p : pairs) {
    const TfIdf hyp = tfidf(p.candidate, df, log_n);
    double score = 0.0;
    for (const auto& r : p.references) {
      const TfIdf ref = tfidf(r, df, log_n);
      const double delta = hyp.length - ref.length;
      const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
      for (std::size_t k = 0; k < 4; ++k) {
        double val = 0.0;
        for (const auto& [g, w] : hyp.vec[k]) {
          auto it = ref.vec[k].find(g);
          if (it != ref.vec[k].end()) val += std::min(w, it->second) * it->second;
        }
        if (hyp.norm[k] != 0.0 && ref.norm[k] != 0.0) val /= hyp.norm[k] * ref.norm[k];
        score += val * penalty;
      }
    }
    total += score / 4.0 / static_cast<double>(p.references.size()) * 10.0;
  }
  return total / static_cast<double>(pairs.size());
}

MetricReport evaluate_all(std::span<const EvalPair> pairs) {
  MetricReport r;
  for (int n = 1; n <= 4; ++n) r.bleu[n - 1] = bleu(pairs, n);
  r.rouge_l = rouge_l(pairs);
  r.cider_d = pairs.size() >= 2 ? cider_d(pairs) : 0.0;
  return r;
}

std::vector<EvalPair> join_by_id(const std::map<std::string, std::string>& candidates,
                                 const std::multimap<std::string, std::string>& references) {
  std::vector<EvalPair> pairs;
  for (const auto& [id, text] : candidates) {
    auto [lo, hi] = references.equal_range(id);
    if (lo == hi) throw FormatError("no references for video '" + id + "'");
    EvalPair p{tokenize_words(text), {}};
    for (auto it = lo; it != hi; ++it) p.references.push_back(tokenize_words(it->second));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace sgcap
