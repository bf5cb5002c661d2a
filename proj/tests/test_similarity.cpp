#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgcap/error.hpp"
#include "sgcap/similarity.hpp"
#include "test_util.hpp"

using namespace sgcap;
using sgcap::testing::record;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

}  // namespace

TEST(Cosine, Examples) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{1, 1}, z{0, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(std::span<const double>(c), std::span<const double>(c)), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::span<const double>(a), std::span<const double>(b)), 0.0);
  EXPECT_NEAR(cosine_similarity(std::span<const double>(a), std::span<const double>(c)), std::sqrt(0.5), 1e-9);
  EXPECT_EQ(cosine_similarity(std::span<const double>(a), std::span<const double>(z)), 0.0);
}

TEST(Cosine, NonFiniteRejected) {
  const std::vector<double> a{1, std::numeric_limits<double>::infinity()}, b{1, 1};
  EXPECT_THROW(cosine_similarity(std::span<const double>(a), std::span<const double>(b)), ConfigError);
}

TEST(Cosine, ScaleInvariance) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> scale(0.01, 100);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const double c = scale(rng);
    auto ca = a;
    for (auto& x : ca) x *= c;
    EXPECT_NEAR(cosine_similarity(std::span<const double>(a), std::span<const double>(b)),
                cosine_similarity(std::span<const double>(ca), std::span<const double>(b)), 1e-12);
  }
}

TEST(Jaccard, Examples) {
  const auto s = words({"guitar", "man", "play"});
  EXPECT_DOUBLE_EQ(jaccard_similarity(s, s), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_similarity(words({"a", "b"}), words({"c", "d"})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_similarity(s, words({"man", "piano", "play"})), 0.5);
  EXPECT_DOUBLE_EQ(jaccard_similarity(words({}), words({})), 0.0);
}

TEST(Jaccard, SymmetricAndBounded) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution pick(0.4);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> a, b;
    for (const auto& w : sgcap::testing::word_pool()) {
      if (pick(rng)) a.push_back(w);
      if (pick(rng)) b.push_back(w);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double ab = jaccard_similarity(a, b);
    EXPECT_EQ(ab, jaccard_similarity(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Hybrid, Examples) {
  EXPECT_NEAR(hybrid_score(0.8, 0.4, 0.5), 0.6, 1e-15);
  EXPECT_EQ(hybrid_score(0.3, 0.9, 1.0), 0.3);
  EXPECT_EQ(hybrid_score(0.3, 0.9, 0.0), 0.9);
  EXPECT_THROW(hybrid_score(0.3, 0.9, -0.1), ConfigError);
  EXPECT_THROW(hybrid_score(0.3, 0.9, 1.1), ConfigError);
}

TEST(Hybrid, MonotoneInBothArguments) {
  for (double s : {0.1, 0.5, 0.9})
    for (double c = -1; c < 1; c += 0.1)
      for (double j = 0; j < 1; j += 0.1) {
        EXPECT_LE(hybrid_score(c, j, s), hybrid_score(c + 0.05, j, s));
        EXPECT_LE(hybrid_score(c, j, s), hybrid_score(c, j + 0.05, s));
      }
}

TEST(SelectGroup, TopTwoOfThree) {
  // Cosine-only scores against the query (1, 0): 0.9, 0.1, 0.5.
  auto bank = build_bank({record("a", {}, {0.9f, std::sqrt(1 - 0.81f)}), record("b", {}, {0.1f, std::sqrt(0.99f)}),
                          record("c", {}, {0.5f, std::sqrt(0.75f)})});
  const std::vector<float> q{1, 0};
  auto g = select_group(GroupQuery{q, {}, std::nullopt}, bank, 1.0, 2, false);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.members[0].index, 0u);
  EXPECT_EQ(g.members[1].index, 2u);
  EXPECT_EQ(g.members[0].embedding, (std::vector<double>{0.9f, std::sqrt(1 - 0.81f)}));
}

TEST(SelectGroup, WholeBankWithoutExclusion) {
  std::mt19937_64 rng(4);
  auto bank = sgcap::testing::random_bank(rng, 6, 3);
  auto g = select_group(query_for(bank, 0), bank, 0.5, 6, false);
  std::vector<std::size_t> idx;
  for (const auto& m : g.members) idx.push_back(m.index);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(g.members[0].index, 0u);  // self scores 1
}

TEST(SelectGroup, SelfExcluded) {
  std::mt19937_64 rng(6);
  auto bank = sgcap::testing::random_bank(rng, 10, 4);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto g = select_group(query_for(bank, i), bank, 0.5, 9, true);
    for (const auto& m : g.members) EXPECT_NE(m.index, i);
  }
}

TEST(SelectGroup, KTooLarge) {
  std::mt19937_64 rng(8);
  auto bank = sgcap::testing::random_bank(rng, 5, 4);
  EXPECT_THROW(select_group(query_for(bank, 0), bank, 0.5, 5, true), ConfigError);
  EXPECT_THROW(select_group(query_for(bank, 0), bank, 0.5, 6, false), ConfigError);
}

TEST(SelectGroup, TiesBreakByIndex) {
  auto bank = build_bank({record("a", {"x"}, {1, 0}), record("b", {"x"}, {1, 0}), record("c", {"x"}, {1, 0}),
                          record("d", {}, {0, 1})});
  const std::vector<float> q{1, 0};
  const std::vector<std::string> t{"x"};
  auto g = select_group(GroupQuery{q, t, std::nullopt}, bank, 0.5, 3, false);
  EXPECT_EQ(g.members[0].index, 0u);
  EXPECT_EQ(g.members[1].index, 1u);
  EXPECT_EQ(g.members[2].index, 2u);
}

TEST(SelectGroup, ScoreBankMatchesParts) {
  std::mt19937_64 rng(10);
  auto bank = sgcap::testing::random_bank(rng, 12, 5);
  auto q = query_for(bank, 3);
  for (const auto& c : score_bank(q, bank, 0.3)) {
    EXPECT_DOUBLE_EQ(c.cosine, cosine_similarity(q.embedding, bank.embedding(c.index)));
    EXPECT_DOUBLE_EQ(c.jaccard, jaccard_similarity(q.tokens, bank.record(c.index).tokens));
    EXPECT_DOUBLE_EQ(c.hybrid, hybrid_score(c.cosine, c.jaccard, 0.3));
  }
}
