#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "coordnet/user_metrics.hpp"
#include "support.hpp"

using namespace coordnet;
using namespace coordnet::testing;

namespace {

std::vector<ScoredPost> originals(const std::vector<double>& tox) {
  std::vector<ScoredPost> out;
  for (double t : tox) out.push_back({PostKind::original, t});
  return out;
}

double brute_top_mean(std::vector<double> v, double fraction) {
  std::sort(v.rbegin(), v.rend());
  std::size_t k = 1;
  while (static_cast<double>(k) < fraction * static_cast<double>(v.size()) - 1e-9) ++k;
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

}  // namespace

TEST(UserToxicity, Examples) {
  std::vector<double> tenths;
  for (int i = 1; i <= 10; ++i) tenths.push_back(i / 10.0);
  const auto a = user_toxicity(originals(tenths));
  ASSERT_TRUE(a);
  EXPECT_EQ(a->value, 1.0);
  EXPECT_EQ(a->n_top_used, 1u);
  EXPECT_EQ(a->n_posts_considered, 10u);

  std::vector<double> v25(25);
  for (int i = 0; i < 25; ++i) v25[i] = i / 25.0;
  const auto b = user_toxicity(originals(v25));
  EXPECT_EQ(b->n_top_used, 3u);
  EXPECT_DOUBLE_EQ(b->value, (24 + 23 + 22) / 75.0);

  EXPECT_DOUBLE_EQ(user_toxicity(originals({0.2, 0.2, 0.2, 0.2}))->value, 0.2);
}

TEST(UserToxicity, EligibilityRules) {
  const std::vector<ScoredPost> posts{{PostKind::original, 0.1},  {PostKind::retweet, 0.9},
                                      {PostKind::reply, 1.0},     {PostKind::quote, 1.0},
                                      {PostKind::original, std::nullopt}};
  const auto with = user_toxicity(posts, 1.0, true);
  EXPECT_EQ(with->n_posts_considered, 2u);
  EXPECT_DOUBLE_EQ(with->value, 0.5);
  const auto without = user_toxicity(posts, 1.0, false);
  EXPECT_EQ(without->n_posts_considered, 1u);
  EXPECT_EQ(without->value, 0.1);
  EXPECT_FALSE(user_toxicity(std::vector<ScoredPost>{{PostKind::retweet, 0.5}}, 0.1, false));
  EXPECT_FALSE(user_toxicity(std::vector<ScoredPost>{}));
}

TEST(UserToxicity, CeilingMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n = 1; n <= 200; ++n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const auto r = user_toxicity(originals(v));
    ASSERT_EQ(r->n_top_used, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n) - 1e-9))));
    ASSERT_NEAR(r->value, brute_top_mean(v, 0.1), 1e-12);
  }
}

TEST(UserToxicity, FullFractionIsPlainMean) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 50);
    for (auto& x : v) x = u(rng);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    ASSERT_NEAR(user_toxicity(originals(v), 1.0)->value, mean, 1e-12);
  }
}

TEST(UserToxicity, PermutationInvariantAndMonotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = u(rng);
    const double frac = 0.05 + 0.95 * u(rng);
    const double base = user_toxicity(originals(v), frac)->value;
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(user_toxicity(originals(shuffled), frac)->value, base);
    auto raised = v;
    auto& target = raised[rng() % raised.size()];
    target = std::min(1.0, target + u(rng));
    ASSERT_GE(user_toxicity(originals(raised), frac)->value, base - 1e-15);
    ASSERT_GE(base, 0.0);
    ASSERT_LE(base, 1.0);
  }
}

TEST(Activity, MinimumFilterAndCounts) {
  EXPECT_EQ(filter_min_activity({{"a", 5}, {"b", 4}}), std::set<std::string>{"a"});
  EXPECT_TRUE(filter_min_activity({}).empty());
  EXPECT_EQ(filter_min_activity({{"a", 1}, {"b", 7}}, 1), (std::set<std::string>{"a", "b"}));

  const Corpus c({original("1", "u", 0), retweet("2", "u", 1, "1", "u"), make_post("3", "u", 2, PostKind::reply, "x", "1", "u"),
                  original("4", "v", 3)});
  const auto counts = activity_counts(c);
  EXPECT_EQ(counts.at("u"), 2u);
  EXPECT_EQ(counts.at("v"), 1u);
}

TEST(Activity, AllUserToxicityAndRoundTrip) {
  const Corpus c({original("1", "u", 0), retweet("2", "u", 1, "1", "u"), original("3", "v", 2), original("4", "w", 3)});
  ToxicityTable t;
  t.scores = {{"1", 0.2}, {"2", 0.8}, {"3", 0.5}};
  t.unscored = {{"4", UnscoredReason::unsupported_language}};
  const auto all = all_user_toxicity(c, t);
  EXPECT_EQ(all.at("u").value, 0.8);
  EXPECT_EQ(all.at("v").value, 0.5);
  EXPECT_FALSE(all.count("w"));
  EXPECT_EQ(all_user_toxicity(c, t, 0.1, false).at("u").value, 0.2);

  TempDir dir;
  write_user_toxicity(all, dir / "ut.csv");
  const auto back = read_user_toxicity(dir / "ut.csv");
  ASSERT_EQ(back.size(), all.size());
  for (const auto& [u, v] : all) {
    EXPECT_EQ(back.at(u).value, v.value);
    EXPECT_EQ(back.at(u).n_posts_considered, v.n_posts_considered);
    EXPECT_EQ(back.at(u).n_top_used, v.n_top_used);
  }
}
