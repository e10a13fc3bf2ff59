#include <gtest/gtest.h>

#include <sstream>

#include "coordnet/coordination.hpp"
#include "coordnet/error.hpp"
#include "coordnet/pipeline.hpp"
#include "coordnet/sequences.hpp"
#include "coordnet/synthetic.hpp"
#include "coordnet/transfer_entropy.hpp"
#include "coordnet/toxicity.hpp"

using namespace coordnet;

namespace {

SyntheticSpec compact(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_users = 1500;
  spec.n_posts = 15000;
  spec.group_size = 20;
  spec.co_retweet_pool_size = 15;
  spec.coordinated_posts = 80;
  spec.hours = 240;
  spec.seed = seed;
  return spec;
}

std::string serialized(const Corpus& c) {
  std::ostringstream ss;
  write_corpus(ss, c);
  return ss.str();
}

double cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.index[i] == b.index[j])
      dot += a.value[i++] * b.value[j++];
    else if (a.index[i] < b.index[j])
      ++i;
    else
      ++j;
  }
  const double n = a.norm() * b.norm();
  return n > 0.0 ? dot / n : 0.0;
}

}  // namespace

TEST(Synthetic, SameSeedIsByteIdentical) {
  const auto a = generate(compact(3)), b = generate(compact(3)), c = generate(compact(4));
  EXPECT_EQ(serialized(a.corpus), serialized(b.corpus));
  EXPECT_EQ(a.truth.planted_group, b.truth.planted_group);
  EXPECT_NE(serialized(a.corpus), serialized(c.corpus));
  EXPECT_EQ(a.truth.planted_group.size(), 40u);
}

TEST(Synthetic, InfeasibleSpecsAreRejected) {
  auto spec = compact(1);
  spec.group_size = spec.n_users + 1;
  EXPECT_THROW(spec.validate(), DomainError);
  spec = compact(1);
  spec.co_retweet_rate = 1.5;
  EXPECT_THROW(spec.validate(), DomainError);
  spec = compact(1);
  spec.n_posts = 0;
  EXPECT_THROW(generate(spec), DomainError);
}

TEST(Synthetic, PlantedUsersAreMoreSimilarThanBackground) {
  const auto s = generate(compact(6));
  const auto& corpus = s.corpus;
  std::vector<std::string> users;
  for (const auto& [u, _] : corpus.retweet_counts()) users.push_back(u);
  const auto vectors = build_retweet_vectors(corpus, users);
  double planted = 0.0, background = 0.0;
  std::size_t n_planted = 0, n_background = 0;
  std::vector<std::string> group0, others;
  for (const auto& [u, g] : s.truth.planted_group)
    if (g == 0) group0.push_back(u);
  for (const auto& u : users)
    if (!s.truth.planted_group.count(u) && others.size() < 60) others.push_back(u);
  for (std::size_t i = 0; i < group0.size(); ++i)
    for (std::size_t j = i + 1; j < group0.size(); ++j, ++n_planted)
      planted += cosine(vectors.by_user.at(group0[i]), vectors.by_user.at(group0[j]));
  for (std::size_t i = 0; i < others.size(); ++i)
    for (std::size_t j = i + 1; j < others.size(); ++j, ++n_background)
      background += cosine(vectors.by_user.at(others[i]), vectors.by_user.at(others[j]));
  EXPECT_GT(planted / static_cast<double>(n_planted), 5.0 * background / static_cast<double>(n_background));
}

TEST(Synthetic, NoCouplingMeansNoSignificantFlow) {
  const auto s = generate(compact(8));
  ToxicityTable tox;
  OfflineBackend backend;
  for (const auto& p : s.corpus.posts()) {
    const auto text = preprocess_text(p.text);
    if (!text.empty()) tox.scores[p.post_id] = backend.score(text).value;
  }
  std::set<std::string> coordinated;
  for (const auto& [u, _] : s.truth.planted_group) coordinated.insert(u);
  std::map<std::string, double> leaning;
  InteractionContext ctx{&s.corpus, &tox, &coordinated, &leaning};
  const auto streams = collect_action_streams(ctx);
  const auto [start, end] = hour_window(streams.productions);
  const std::vector<double> probs{0.05, 0.5, 0.95};
  const auto x = symbolize(hourly_series(streams.coordinated_interactions, start, end), probs);
  const auto y = symbolize(hourly_series(streams.productions, start, end), probs);
  EXPECT_GT(te_significance(x, y, 0.5, 1, 300, 1).p_value, 0.05);
}
