#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>

#include "coordnet/network.hpp"
#include "coordnet/transfer_entropy.hpp"

namespace coordnet::testing {

inline WeightedNetwork random_graph(std::mt19937_64& rng, std::size_t max_nodes, bool tied_weights) {
  WeightedNetwork g;
  const std::size_t n = 2 + rng() % (max_nodes - 1);
  for (std::size_t i = 0; i < n; ++i) g.add_node("n" + std::to_string(i));
  const double density = 0.15 + 0.6 * static_cast<double>(rng() % 1000) / 1000.0;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b) {
      if (static_cast<double>(rng() % 1000) / 1000.0 >= density) continue;
      const double w = tied_weights ? 0.1 * static_cast<double>(1 + rng() % 5)
                                    : static_cast<double>(1 + rng() % 100000) / 100000.0;
      g.add_edge(a, b, w);
    }
  return g;
}

// Recomputes connectivity from scratch at every threshold.
inline std::map<std::string, double> oracle_scores(const WeightedNetwork& g) {
  std::set<double> distinct;
  for (const auto& e : g.edges()) distinct.insert(e.weight);
  std::vector<double> thresholds(distinct.begin(), distinct.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  const double total = static_cast<double>(g.edge_count());

  auto degrees_at = [&](double t) {
    std::vector<int> deg(g.node_count(), 0);
    for (const auto& e : g.edges())
      if (!(e.weight < t)) ++deg[e.u], ++deg[e.v];
    return deg;
  };
  std::map<std::string, double> out;
  auto prev = degrees_at(-1.0);
  for (NodeId i = 0; i < g.node_count(); ++i)
    if (prev[i] == 0) out[g.name(i)] = 0.0;
  for (double t : thresholds) {
    const auto deg = degrees_at(t);
    std::size_t lighter = 0;
    for (const auto& e : g.edges()) lighter += e.weight < t;
    for (NodeId i = 0; i < g.node_count(); ++i)
      if (prev[i] > 0 && deg[i] == 0) out[g.name(i)] = static_cast<double>(lighter) / total;
    prev = deg;
  }
  return out;
}

// Plug-in Shannon transfer entropy with history 1, in bits.
inline double shannon_te(const SymbolSeries& x, const SymbolSeries& y) {
  std::map<std::tuple<int, int, int>, double> xyz;
  std::map<std::pair<int, int>, double> yx, yy;
  std::map<int, double> y0;
  double n = 0;
  for (std::size_t t = 0; t + 1 < y.size(); ++t) {
    if (!x[t] || !y[t] || !y[t + 1]) continue;
    xyz[{*y[t + 1], *y[t], *x[t]}] += 1;
    yx[{*y[t], *x[t]}] += 1;
    yy[{*y[t + 1], *y[t]}] += 1;
    y0[*y[t]] += 1;
    n += 1;
  }
  double te = 0.0;
  for (const auto& [k, c] : xyz) {
    const auto [y1, yv, xv] = k;
    te += c / n * std::log2((c / yx[{yv, xv}]) / (yy[{y1, yv}] / y0[yv]));
  }
  return te;
}

inline SymbolSeries iid(std::size_t n, int symbols, std::mt19937_64& rng) {
  SymbolSeries s(n);
  for (auto& v : s) v = static_cast<int>(rng() % static_cast<std::uint64_t>(symbols));
  return s;
}

inline SymbolSeries shifted(const SymbolSeries& x, std::size_t lag, std::mt19937_64& rng, int symbols) {
  SymbolSeries y(x.size());
  for (std::size_t t = 0; t < y.size(); ++t)
    y[t] = t >= lag ? x[t - lag] : std::optional<int>(static_cast<int>(rng() % static_cast<std::uint64_t>(symbols)));
  return y;
}

}  // namespace coordnet::testing
