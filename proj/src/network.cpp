#include "coordnet/network.hpp"

#include <sstream>
#include <utility>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

NodeId WeightedNetwork::add_node(std::string_view name) {
  std::string key(name);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<NodeId>(names_.size());
  names_.push_back(key);
  index_.emplace(std::move(key), id);
  adjacency_.emplace_back();
  strength_.push_back(0.0);
  attrs_.emplace_back();
  return id;
}

void WeightedNetwork::add_edge(NodeId a, NodeId b, double weight) {
  if (a >= names_.size() || b >= names_.size()) throw DomainError("edge endpoint out of range");
  if (a == b) throw DomainError("self-loop on node " + names_[a]);
  if (!(weight > 0.0)) throw DomainError("edge weight must be positive");
  if (a > b) std::swap(a, b);
  if (edge_keys_.count(key(a, b))) throw DomainError("duplicate edge " + names_[a] + "-" + names_[b]);
  add_edge_unchecked(a, b, weight);
}

void WeightedNetwork::add_edge(std::string_view a, std::string_view b, double weight) {
  const NodeId ia = add_node(a);
  const NodeId ib = add_node(b);
  add_edge(ia, ib, weight);
}

void WeightedNetwork::add_edge_unchecked(NodeId u, NodeId v, double weight) {
  const auto idx = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back({u, v, weight});
  edge_keys_.insert(key(u, v));
  adjacency_[u].push_back({v, idx});
  adjacency_[v].push_back({u, idx});
  strength_[u] += weight;
  strength_[v] += weight;
}

std::optional<NodeId> WeightedNetwork::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool WeightedNetwork::has_edge(NodeId a, NodeId b) const {
  if (a > b) std::swap(a, b);
  return edge_keys_.count(key(a, b)) > 0;
}

void WeightedNetwork::set_attr(NodeId id, const std::string& attr, double value) { attrs_.at(id)[attr] = value; }

std::optional<double> WeightedNetwork::attr(NodeId id, const std::string& attr) const {
  const auto& m = attrs_.at(id);
  auto it = m.find(attr);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

const std::map<std::string, double>& WeightedNetwork::attrs(NodeId id) const { return attrs_.at(id); }

WeightedNetwork WeightedNetwork::copy_nodes() const {
  WeightedNetwork out;
  out.names_ = names_;
  out.index_ = index_;
  out.attrs_ = attrs_;
  out.adjacency_.assign(names_.size(), {});
  out.strength_.assign(names_.size(), 0.0);
  return out;
}

WeightedNetwork WeightedNetwork::subgraph(std::span<const NodeId> nodes) const {
  WeightedNetwork out;
  std::unordered_map<NodeId, NodeId> remap;
  for (NodeId n : nodes) {
    const NodeId id = out.add_node(names_.at(n));
    out.attrs_[id] = attrs_[n];
    remap.emplace(n, id);
  }
  for (const auto& e : edges_) {
    auto iu = remap.find(e.u);
    auto iv = remap.find(e.v);
    if (iu != remap.end() && iv != remap.end()) out.add_edge(iu->second, iv->second, e.weight);
  }
  return out;
}

void write_edge_list(const WeightedNetwork& net, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("source", "target", "weight");
  for (const auto& e : net.edges()) w.row(net.name(e.u), net.name(e.v), e.weight);
  write_file_atomic(path, ss.str());
}

void write_node_attrs(const WeightedNetwork& net, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("node", "attr", "value");
  for (NodeId i = 0; i < net.node_count(); ++i) {
    const auto& m = net.attrs(i);
    if (m.empty()) {
      w.row(net.name(i), "", "");
      continue;
    }
    for (const auto& [k, v] : m) w.row(net.name(i), k, v);
  }
  write_file_atomic(path, ss.str());
}

WeightedNetwork read_network(const std::filesystem::path& edges, const std::optional<std::filesystem::path>& attrs) {
  WeightedNetwork net;
  if (attrs) {
    auto rows = csv::read_file(*attrs);
    if (rows.empty() || rows[0] != std::vector<std::string>{"node", "attr", "value"})
      throw ParseError("bad node attribute header in " + attrs->string());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3) throw ParseError("bad node attribute row", i + 1);
      const NodeId id = net.add_node(rows[i][0]);
      if (!rows[i][1].empty()) net.set_attr(id, rows[i][1], csv::parse_double(rows[i][2]));
    }
  }
  auto rows = csv::read_file(edges);
  if (rows.empty() || rows[0] != std::vector<std::string>{"source", "target", "weight"})
    throw ParseError("bad edge list header in " + edges.string());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw ParseError("bad edge row", i + 1);
    try {
      net.add_edge(rows[i][0], rows[i][1], csv::parse_double(rows[i][2]));
    } catch (const Error& e) {
      throw ParseError(e.what(), i + 1);
    }
  }
  return net;
}

}  // namespace coordnet
