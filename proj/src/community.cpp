#include "coordnet/community.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

namespace {

// Symmetric weight matrix of one aggregation level. `self` holds the diagonal
// A_ii (twice the internal weight of the merged nodes).
struct Level {
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> self;

  std::size_t size() const { return self.size(); }
  double degree(std::size_t i) const {
    double k = self[i];
    for (const auto& [_, w] : adj[i]) k += w;
    return k;
  }
};

Level level_from_network(const WeightedNetwork& net) {
  Level lv;
  lv.adj.resize(net.node_count());
  lv.self.assign(net.node_count(), 0.0);
  for (const auto& e : net.edges()) {
    lv.adj[e.u].emplace_back(static_cast<int>(e.v), e.weight);
    lv.adj[e.v].emplace_back(static_cast<int>(e.u), e.weight);
  }
  return lv;
}

// Local moving phase. Returns true when at least one node changed community.
bool move_nodes(const Level& lv, std::vector<int>& comm, double resolution, std::mt19937_64& rng) {
  const std::size_t n = lv.size();
  std::vector<double> k(n), tot(n);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = lv.degree(i);
    m2 += k[i];
  }
  comm.resize(n);
  std::iota(comm.begin(), comm.end(), 0);
  if (m2 <= 0.0) return false;
  tot = k;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);

  std::vector<double> link(n, 0.0);
  std::vector<int> touched;
  bool any_move = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i : order) {
      const int own = comm[i];
      touched.clear();
      for (const auto& [j, w] : lv.adj[i]) {
        const int c = comm[j];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      tot[own] -= k[i];
      int best = own;
      double best_gain = link[own] - resolution * tot[own] * k[i] / m2;
      std::sort(touched.begin(), touched.end());
      for (int c : touched) {
        if (c == own) continue;
        const double gain = link[c] - resolution * tot[c] * k[i] / m2;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += k[i];
      for (int c : touched) link[c] = 0.0;
      link[own] = 0.0;
      if (best != own) {
        comm[i] = best;
        moved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

// Renumbers ids densely; returns the number of communities.
int compact(std::vector<int>& comm) {
  std::unordered_map<int, int> remap;
  for (auto& c : comm) {
    auto [it, inserted] = remap.emplace(c, static_cast<int>(remap.size()));
    c = it->second;
  }
  return static_cast<int>(remap.size());
}

Level aggregate(const Level& lv, const std::vector<int>& comm, int n_comm) {
  Level out;
  out.adj.resize(n_comm);
  out.self.assign(n_comm, 0.0);
  std::vector<std::unordered_map<int, double>> acc(n_comm);
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const int ci = comm[i];
    out.self[ci] += lv.self[i];
    for (const auto& [j, w] : lv.adj[i]) {
      const int cj = comm[j];
      if (ci == cj)
        out.self[ci] += w;  // each internal edge is seen from both sides
      else
        acc[ci][cj] += w;
    }
  }
  for (int c = 0; c < n_comm; ++c) {
    out.adj[c].assign(acc[c].begin(), acc[c].end());
    std::sort(out.adj[c].begin(), out.adj[c].end());
  }
  return out;
}

}  // namespace

double modularity(const WeightedNetwork& net, const std::vector<int>& community, double resolution) {
  if (community.size() != net.node_count()) throw DomainError("partition size does not match node count");
  double m2 = 0.0;
  std::unordered_map<int, double> in, tot;
  for (const auto& e : net.edges()) {
    m2 += 2.0 * e.weight;
    tot[community[e.u]] += e.weight;
    tot[community[e.v]] += e.weight;
    if (community[e.u] == community[e.v]) in[community[e.u]] += 2.0 * e.weight;
  }
  if (m2 == 0.0) return 0.0;
  double q = 0.0;
  for (const auto& [c, t] : tot) {
    const double inside = in.count(c) ? in.at(c) : 0.0;
    q += inside / m2 - resolution * (t / m2) * (t / m2);
  }
  return q;
}

std::vector<int> louvain_partition(const WeightedNetwork& net, std::uint64_t seed, double resolution) {
  const std::size_t n = net.node_count();
  std::vector<int> node_comm(n);
  std::iota(node_comm.begin(), node_comm.end(), 0);
  std::mt19937_64 rng(seed);

  Level lv = level_from_network(net);
  while (true) {
    std::vector<int> comm;
    if (!move_nodes(lv, comm, resolution, rng)) break;
    const int n_comm = compact(comm);
    for (auto& c : node_comm) c = comm[c];
    if (static_cast<std::size_t>(n_comm) == lv.size()) break;
    lv = aggregate(lv, comm, n_comm);
  }

  // Relabel: larger communities first, ties by smallest member name.
  const int n_comm = compact(node_comm);
  std::vector<std::size_t> size(n_comm, 0);
  std::vector<const std::string*> smallest(n_comm, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = node_comm[i];
    ++size[c];
    if (!smallest[c] || net.name(static_cast<NodeId>(i)) < *smallest[c]) smallest[c] = &net.name(static_cast<NodeId>(i));
  }
  std::vector<int> order(n_comm);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (size[a] != size[b]) return size[a] > size[b];
    return *smallest[a] < *smallest[b];
  });
  std::vector<int> rank(n_comm);
  for (int r = 0; r < n_comm; ++r) rank[order[r]] = r;
  for (auto& c : node_comm) c = rank[c];
  return node_comm;
}

std::map<std::string, int> louvain_communities(const WeightedNetwork& net, std::uint64_t seed) {
  const auto part = louvain_partition(net, seed);
  std::map<std::string, int> out;
  for (NodeId i = 0; i < net.node_count(); ++i) out.emplace(net.name(i), part[i]);
  return out;
}

}  // namespace coordnet
