#include "sgcap/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "sgcap/error.hpp"

namespace sgcap {

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ConfigError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    if (!std::isfinite(x) || !std::isfinite(y))
      throw ConfigError("cosine_similarity: non-finite input");
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.hybrid != b.hybrid) return a.hybrid > b.hybrid;
  return a.index < b.index;
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  return cosine_impl(a, b);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

double jaccard_similarity(std::span<const std::string> a, std::span<const std::string> b) {
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter, ++i, ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double hybrid_score(double cosine, double jaccard, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
  return sigma * cosine + (1.0 - sigma) * jaccard;
}

GroupQuery query_for(const SentenceBank& bank, std::size_t i) {
  const auto& rec = bank.record(i);
  return {rec.embedding, rec.tokens, i};
}

std::vector<ScoredCandidate> score_bank(const GroupQuery& query, const SentenceBank& bank,
                                        double sigma) {
  if (query.embedding.size() != bank.dim())
    throw ConfigError("query dimension does not match bank dimension");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");

  double qn = 0.0;
  for (float x : query.embedding) {
    if (!std::isfinite(x)) throw ConfigError("query embedding is not finite");
    qn += static_cast<double>(x) * x;
  }
  qn = std::sqrt(qn);

  std::vector<ScoredCandidate> out(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto e = bank.embedding(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) dot += static_cast<double>(query.embedding[j]) * e[j];
    const double bn = bank.norm(i);
    auto& c = out[i];
    c.index = i;
    c.cosine = (qn == 0.0 || bn == 0.0) ? 0.0 : dot / (qn * bn);
    c.jaccard = jaccard_similarity(query.tokens, bank.record(i).tokens);
    c.hybrid = hybrid_score(c.cosine, c.jaccard, sigma);
  }
  return out;
}

SemanticGroup select_group(const GroupQuery& query, const SentenceBank& bank, double sigma,
                           std::size_t k, bool exclude_self) {
  auto scored = score_bank(query, bank, sigma);
  if (exclude_self && query.bank_index) {
    std::erase_if(scored, [&](const ScoredCandidate& c) { return c.index == *query.bank_index; });
  }
  if (k > scored.size())
    throw ConfigError("group size k=" + std::to_string(k) + " exceeds the " +
                      std::to_string(scored.size()) + " eligible bank entries");
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    before);

  SemanticGroup group;
  group.members.reserve(k);
  for (std::size_t m = 0; m < k; ++m) {
    auto e = bank.embedding(scored[m].index);
    group.members.push_back({scored[m].index, scored[m].hybrid, {e.begin(), e.end()}});
  }
  return group;
}

}  // namespace sgcap
