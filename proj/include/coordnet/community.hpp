#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coordnet/network.hpp"

namespace coordnet {

/// Weighted modularity of a partition given as a community id per node.
double modularity(const WeightedNetwork& net, const std::vector<int>& community, double resolution = 1.0);

/// Multi-level Louvain optimisation of weighted modularity. Node visiting
/// order at every level is a permutation drawn from `seed`, so results are
/// reproducible. Community ids are dense, numbered by decreasing size (ties
/// by the smallest member name).
std::vector<int> louvain_partition(const WeightedNetwork& net, std::uint64_t seed, double resolution = 1.0);

/// Same partition keyed by node name.
std::map<std::string, int> louvain_communities(const WeightedNetwork& net, std::uint64_t seed);

}  // namespace coordnet
