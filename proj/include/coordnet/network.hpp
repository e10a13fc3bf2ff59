#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace coordnet {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u;  // u < v
  NodeId v;
  double weight;
};

struct Neighbor {
  NodeId node;
  std::uint32_t edge;  // index into edges()
};

/// Undirected weighted graph with named nodes and numeric node attributes.
/// No self-loops, no parallel edges, strictly positive weights. Node ids are
/// dense and assigned in insertion order; edges are stored with u < v.
class WeightedNetwork {
 public:
  /// Returns the id of `name`, inserting it when new.
  NodeId add_node(std::string_view name);
  /// Throws DomainError on self-loops, non-positive weights and duplicates.
  void add_edge(NodeId a, NodeId b, double weight);
  void add_edge(std::string_view a, std::string_view b, double weight);

  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::string& name(NodeId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<NodeId> find(std::string_view name) const;

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(NodeId id) const { return adjacency_.at(id); }
  bool has_edge(NodeId a, NodeId b) const;

  std::size_t degree(NodeId id) const { return adjacency_.at(id).size(); }
  double strength(NodeId id) const { return strength_.at(id); }

  void set_attr(NodeId id, const std::string& attr, double value);
  std::optional<double> attr(NodeId id, const std::string& attr) const;
  const std::map<std::string, double>& attrs(NodeId id) const;

  /// Same nodes (ids, names, attributes), only the edges for which keep(i) holds.
  template <typename Pred>
  WeightedNetwork filter_edges(Pred keep) const {
    WeightedNetwork out = copy_nodes();
    for (std::uint32_t i = 0; i < edges_.size(); ++i)
      if (keep(i)) out.add_edge_unchecked(edges_[i].u, edges_[i].v, edges_[i].weight);
    return out;
  }

  /// Node-induced subgraph; node order follows `nodes`.
  WeightedNetwork subgraph(std::span<const NodeId> nodes) const;

  WeightedNetwork copy_nodes() const;

 private:
  void add_edge_unchecked(NodeId u, NodeId v, double weight);
  static std::uint64_t key(NodeId u, NodeId v) { return (std::uint64_t{u} << 32) | v; }

  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<double> strength_;
  std::unordered_set<std::uint64_t> edge_keys_;
  std::vector<std::map<std::string, double>> attrs_;
};

/// Edge list CSV `source,target,weight`.
void write_edge_list(const WeightedNetwork& net, const std::filesystem::path& path);
/// Node attributes CSV `node,attr,value`.
void write_node_attrs(const WeightedNetwork& net, const std::filesystem::path& path);
/// Reads an edge list and, when given, a node-attribute file (which may also
/// introduce isolated nodes).
WeightedNetwork read_network(const std::filesystem::path& edges,
                             const std::optional<std::filesystem::path>& attrs = std::nullopt);

}  // namespace coordnet
