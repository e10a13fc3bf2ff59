#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "coordnet/error.hpp"
#include "coordnet/stats.hpp"

using namespace coordnet;

namespace {

double binomial_quantile(int n, double p, double q) {
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    cdf += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                    (n - k) * std::log(1 - p));
    if (cdf >= q) return k;
  }
  return n;
}

WeightedNetwork two_cliques(int size, double bridge) {
  WeightedNetwork g;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < size; ++i)
      for (int j = i + 1; j < size; ++j)
        g.add_edge("c" + std::to_string(c) + "_" + std::to_string(i), "c" + std::to_string(c) + "_" + std::to_string(j),
                   1.0);
  g.add_edge("c0_0", "c1_0", bridge);
  return g;
}

}  // namespace

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  EXPECT_NEAR(spearman(x, y, 200, 1).rho, 0.8, 1e-12);
  const std::vector<double> up{0.1, 0.5, 2.0, 7.0, 9.0};
  const std::vector<double> down{-0.1, -0.5, -2.0, -7.0, -9.0};
  const std::vector<double> xs{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(xs, up, 100, 1).rho, 1.0, 1e-12);
  EXPECT_NEAR(spearman(xs, down, 100, 1).rho, -1.0, 1e-12);
  const std::vector<double> flat{2, 2, 2, 2, 2};
  EXPECT_THROW(spearman(xs, flat, 100, 1), DegenerateError);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 100, 1), DomainError);
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> v{10, 20, 20, 30};
  EXPECT_EQ(fractional_ranks(v), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, MonotoneTransformInvarianceAndReproducibility) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(40), y(40), tx(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = n(rng);
      y[i] = 0.5 * x[i] + n(rng);
      tx[i] = std::exp(3.0 * x[i]) + 2.0;
    }
    const auto a = spearman(x, y, 500, 9), b = spearman(tx, y, 500, 9);
    ASSERT_NEAR(a.rho, b.rho, 1e-12);
    ASSERT_EQ(a.ci.low, b.ci.low);
    ASSERT_EQ(a.ci.high, b.ci.high);
    ASSERT_LE(a.ci.low, a.ci.high);
    const auto again = spearman(x, y, 500, 9);
    ASSERT_EQ(again.ci.low, a.ci.low);
  }
}

TEST(Quantile, Type7) {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  EXPECT_NEAR(quantile_sorted(v, 0.05), 5.95, 1e-12);
  EXPECT_NEAR(quantile_sorted(v, 0.5), 50.5, 1e-12);
  EXPECT_NEAR(quantile_sorted(v, 0.95), 95.05, 1e-12);
  EXPECT_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_EQ(quantile_sorted(v, 1.0), 100.0);
}

TEST(Bootstrap, ConstantValues) {
  const std::vector<double> v(20, 0.3);
  const auto b = bootstrap_mean(v, 1000, 2);
  EXPECT_DOUBLE_EQ(b.mean, 0.3);
  EXPECT_DOUBLE_EQ(b.ci_low, 0.3);
  EXPECT_DOUBLE_EQ(b.ci_high, 0.3);
  EXPECT_EQ(b.distribution.size(), 1000u);
}

TEST(Bootstrap, BinaryValuesMatchBinomialQuantiles) {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(i % 2);
  const auto b = bootstrap_mean(v, 50000, 3);
  EXPECT_EQ(b.mean, 0.5);
  EXPECT_GT(b.ci_low, 0.0);
  EXPECT_LT(b.ci_high, 1.0);
  EXPECT_NEAR(b.ci_low, binomial_quantile(100, 0.5, 0.025) / 100.0, 0.011);
  EXPECT_NEAR(b.ci_high, binomial_quantile(100, 0.5, 0.975) / 100.0, 0.011);
  const auto again = bootstrap_mean(v, 50000, 3);
  EXPECT_EQ(again.distribution, b.distribution);
}

TEST(Bootstrap, WidthShrinksLikeInverseRootN) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> small(200), large(800);
    for (auto& x : small) x = n(rng);
    for (auto& x : large) x = n(rng);
    const auto a = bootstrap_mean(small, 5000, trial), b = bootstrap_mean(large, 5000, trial);
    const double ratio = (a.ci_high - a.ci_low) / (b.ci_high - b.ci_low);
    ASSERT_GE(ratio / 2.0, 0.6);
    ASSERT_LE(ratio / 2.0, 1.4);
    ASSERT_LE(a.ci_low, a.mean);
    ASSERT_GE(a.ci_high, a.mean);
  }
}

TEST(Assortativity, Examples) {
  const auto g = two_cliques(4, 1.0);
  std::map<std::string, double> by_clique;
  for (const auto& name : g.names()) by_clique[name] = name[1] == '0' ? 0.0 : 1.0;
  std::map<std::string, double> clique_only = by_clique;
  WeightedNetwork pure;
  for (const auto& e : g.edges())
    if (g.name(e.u)[1] == g.name(e.v)[1]) pure.add_edge(g.name(e.u), g.name(e.v), 1.0);
  std::map<std::string, double> graded;
  for (const auto& name : pure.names()) graded[name] = name[1] == '0' ? 0.25 : 0.75;
  EXPECT_NEAR(assortativity(pure, graded), 1.0, 1e-12);

  WeightedNetwork cross;
  cross.add_edge("a", "b", 1.0);
  cross.add_edge("c", "d", 1.0);
  EXPECT_NEAR(assortativity(cross, {{"a", 0.0}, {"b", 1.0}, {"c", 1.0}, {"d", 0.0}}), -1.0, 1e-12);
  EXPECT_THROW(assortativity(cross, {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}, {"d", 1.0}}), DegenerateError);
}

TEST(Assortativity, AffineInvariance) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    WeightedNetwork g;
    for (int i = 0; i < 20; ++i) g.add_node("n" + std::to_string(i));
    for (NodeId a = 0; a < 20; ++a)
      for (NodeId b = a + 1; b < 20; ++b)
        if (u(rng) < 0.2) g.add_edge(a, b, 0.1 + u(rng));
    if (g.edge_count() < 3) continue;
    std::map<std::string, double> attr, affine;
    for (const auto& name : g.names()) {
      attr[name] = u(rng);
      affine[name] = 3.5 * attr[name] - 2.0;
    }
    for (bool weighted : {false, true})
      ASSERT_NEAR(assortativity(g, attr, weighted), assortativity(g, affine, weighted), 1e-9);
  }
}

TEST(Shuffle, NullCenteredAndPlantedSignal) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Permutation nulls carry an O(1/N) bias, so the graph is large and sparse.
  WeightedNetwork g;
  const int nodes = 5000;
  for (int i = 0; i < nodes; ++i) g.add_node("n" + std::to_string(i));
  while (g.edge_count() < 10000) {
    const auto a = static_cast<NodeId>(rng() % nodes), b = static_cast<NodeId>(rng() % nodes);
    if (a != b && !g.has_edge(std::min(a, b), std::max(a, b))) g.add_edge(a, b, 1.0);
  }
  std::map<std::string, double> attr;
  for (const auto& name : g.names()) attr[name] = u(rng);
  const auto null = shuffle_zscore(g, attr, 2000, 1);
  EXPECT_LT(std::abs(null.null_mean), 3.0 * null.null_sd / std::sqrt(2000.0));

  const auto cliques = two_cliques(8, 1.0);
  std::map<std::string, double> noisy;
  for (const auto& name : cliques.names()) noisy[name] = (name[1] == '0' ? 0.0 : 1.0) + 0.2 * u(rng);
  const auto planted = shuffle_zscore(cliques, noisy, 2000, 2);
  EXPECT_GT(planted.z, 3.0);
  EXPECT_EQ(shuffle_zscore(cliques, noisy, 2000, 2).z, planted.z);

  std::map<std::string, double> flat;
  for (const auto& name : cliques.names()) flat[name] = 0.4;
  EXPECT_THROW(shuffle_zscore(cliques, flat, 100, 1), DegenerateError);
}

TEST(AndersonDarling, MaximalSeparation) {
  std::vector<double> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(i < 4 ? 0.0 : 0.001 * i);
    b.push_back(i < 4 ? 1.0 : 1.0 - 0.001 * i);
  }
  const auto r = anderson_darling_k({a, b}, 5000, 1);
  EXPECT_LE(r.p_value, 0.001);
  EXPECT_THROW(anderson_darling_k({{1.0, 1.0}, {1.0, 1.0}}, 100, 1), DegenerateError);
  EXPECT_THROW(anderson_darling_k({{1.0, 2.0}}, 100, 1), DomainError);
}

TEST(AndersonDarling, NullCalibration) {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n(0.0, 1.0);
  int rejections = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    std::vector<double> pool(60);
    for (auto& x : pool) x = std::round(n(rng) * 10.0) / 10.0;
    std::vector<double> a(pool.begin(), pool.begin() + 25), b(pool.begin() + 25, pool.end());
    rejections += anderson_darling_k({a, b}, 199, static_cast<std::uint64_t>(r)).p_value <= 0.05;
  }
  EXPECT_GE(rejections, 2);
  EXPECT_LE(rejections, 22);
}

TEST(Loess, ReproducesLinesAndConstants) {
  std::vector<double> x, line, flat;
  for (int i = 0; i < 50; ++i) {
    x.push_back(0.37 * i + (i % 3) * 0.01);
    line.push_back(2.0 - 0.5 * x.back());
    flat.push_back(0.42);
  }
  const auto fit = loess(x, line, 0.4);
  ASSERT_EQ(fit.size(), x.size());
  for (std::size_t i = 0; i < fit.size(); ++i) {
    EXPECT_NEAR(fit[i].fitted, 2.0 - 0.5 * fit[i].x, 1e-9);
    if (i) {
      EXPECT_GE(fit[i].x, fit[i - 1].x);
    }
  }
  for (const auto& p : loess(x, flat, 0.5)) {
    EXPECT_NEAR(p.fitted, 0.42, 1e-12);
    EXPECT_NEAR(p.ci_high - p.ci_low, 0.0, 1e-9);
  }
  EXPECT_THROW(loess(std::vector<double>(10, 1.0), line, 0.5), Error);
}

TEST(Loess, SmoothsNoisySine) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = std::sin(x[i]) + n(rng);
  }
  const auto fit = loess(x, y, 0.3);
  double fit_err = 0.0, raw_err = 0.0;
  for (const auto& p : fit) fit_err += std::pow(p.fitted - std::sin(p.x), 2);
  for (std::size_t i = 0; i < x.size(); ++i) raw_err += std::pow(y[i] - std::sin(x[i]), 2);
  EXPECT_LT(std::sqrt(fit_err / 300.0), std::sqrt(raw_err / 300.0));
  std::size_t covered = 0;
  for (const auto& p : fit) covered += p.ci_low <= std::sin(p.x) && std::sin(p.x) <= p.ci_high;
  EXPECT_GT(covered, 200u);
}
