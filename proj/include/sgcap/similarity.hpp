#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"

namespace sgcap {

// a.b / (|a||b|), accumulated in double. Returns 0 if either vector has zero
// norm. Throws ConfigError on non-finite input or a length mismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// |A n B| / |A u B| over sorted, deduplicated token lists; 0 when both are empty.
double jaccard_similarity(std::span<const std::string> a, std::span<const std::string> b);

// sigma * cosine + (1 - sigma) * jaccard. Throws ConfigError unless sigma is in [0, 1].
double hybrid_score(double cosine, double jaccard, double sigma);

struct ScoredCandidate {
  std::size_t index = 0;
  double cosine = 0.0;
  double jaccard = 0.0;
  double hybrid = 0.0;
};

struct GroupMember {
  std::size_t index = 0;
  double hybrid = 0.0;
  std::vector<double> embedding;
};

// Top-k retrieved bank entries, hybrid score nonincreasing, ties by ascending index.
struct SemanticGroup {
  std::vector<GroupMember> members;

  std::size_t size() const { return members.size(); }
};

struct GroupQuery {
  std::span<const float> embedding;
  std::span<const std::string> tokens;  // sorted, unique
  std::optional<std::size_t> bank_index;
};

// Query for bank entry i, carrying its own index for self-exclusion.
GroupQuery query_for(const SentenceBank& bank, std::size_t i);

// Scores every bank entry against the query.
std::vector<ScoredCandidate> score_bank(const GroupQuery& query, const SentenceBank& bank,
                                        double sigma);

// The k highest hybrid-scored entries. With exclude_self the query's own
// bank index is skipped. Throws ConfigError if k exceeds the eligible count.
SemanticGroup select_group(const GroupQuery& query, const SentenceBank& bank, double sigma,
                           std::size_t k, bool exclude_self);

}  // namespace sgcap
