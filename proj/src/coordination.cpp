#include "coordnet/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "coordnet/community.hpp"
#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

std::vector<std::string> select_superspreaders(const Corpus& corpus, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("superspreader fraction must be in (0,1]");
  std::vector<std::pair<std::string, std::size_t>> retweeters;
  for (const auto& [user, count] : corpus.retweet_counts())
    if (count > 0) retweeters.emplace_back(user, count);
  if (retweeters.empty()) throw DomainError("no user has any retweet");
  std::stable_sort(retweeters.begin(), retweeters.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t k = std::max<std::size_t>(1, ceil_fraction(fraction, retweeters.size()));
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(retweeters[i].first);
  std::sort(out.begin(), out.end());
  return out;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

double RetweetVectors::weight(const std::string& user, const std::string& post_id) const {
  auto it = by_user.find(user);
  if (it == by_user.end()) return 0.0;
  auto term = std::lower_bound(post_ids.begin(), post_ids.end(), post_id);
  if (term == post_ids.end() || *term != post_id) return 0.0;
  const auto id = static_cast<std::uint32_t>(term - post_ids.begin());
  const auto& vec = it->second;
  auto pos = std::lower_bound(vec.index.begin(), vec.index.end(), id);
  if (pos == vec.index.end() || *pos != id) return 0.0;
  return vec.value[pos - vec.index.begin()];
}

RetweetVectors build_retweet_vectors(const Corpus& corpus, const std::vector<std::string>& users) {
  RetweetVectors out;
  std::map<std::string, std::map<std::string, std::size_t>> tf;
  std::map<std::string, std::size_t> df;
  for (const auto& user : users) {
    auto& counts = tf[user];
    for (auto idx : corpus.posts_of(user)) {
      const auto& p = corpus.posts()[idx];
      if (p.kind == PostKind::retweet) ++counts[*p.referenced_post_id];
    }
    for (const auto& [post, _] : counts) ++df[post];
  }
  const double n = static_cast<double>(tf.size());
  std::unordered_map<std::string, std::uint32_t> term_id;
  for (const auto& [post, d] : df) {
    if (static_cast<double>(d) == n) continue;  // idf = ln(1) = 0
    term_id.emplace(post, static_cast<std::uint32_t>(out.post_ids.size()));
    out.post_ids.push_back(post);
  }
  for (const auto& [user, counts] : tf) {
    SparseVector vec;
    for (const auto& [post, count] : counts) {
      auto it = term_id.find(post);
      if (it == term_id.end()) continue;
      const double idf = std::log(n / static_cast<double>(df.at(post)));
      vec.index.push_back(it->second);
      vec.value.push_back(static_cast<double>(count) * idf);
    }
    out.by_user.emplace(user, std::move(vec));
  }
  return out;
}

WeightedNetwork similarity_network(const RetweetVectors& vectors) {
  WeightedNetwork net;
  std::vector<const SparseVector*> vecs;
  for (const auto& [user, vec] : vectors.by_user) {
    net.add_node(user);
    vecs.push_back(&vec);
  }
  const std::size_t n = vecs.size();
  std::vector<double> norms(n);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings(vectors.post_ids.size());
  for (std::size_t u = 0; u < n; ++u) {
    norms[u] = vecs[u]->norm();
    for (std::size_t k = 0; k < vecs[u]->size(); ++k)
      postings[vecs[u]->index[k]].emplace_back(static_cast<std::uint32_t>(u), vecs[u]->value[k]);
  }

  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n);
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t chunks = std::min(hw, std::max<std::size_t>(1, n));
  parallel_for(chunks, [&](std::size_t chunk) {
    std::vector<double> acc(n, 0.0);
    std::vector<std::uint32_t> touched;
    for (std::size_t u = chunk; u < n; u += chunks) {
      touched.clear();
      const auto& vu = *vecs[u];
      for (std::size_t k = 0; k < vu.size(); ++k) {
        const auto& plist = postings[vu.index[k]];
        // postings are in increasing user order; only pairs u < v
        auto it = std::upper_bound(plist.begin(), plist.end(), static_cast<std::uint32_t>(u),
                                   [](std::uint32_t x, const auto& p) { return x < p.first; });
        for (; it != plist.end(); ++it) {
          if (acc[it->first] == 0.0) touched.push_back(it->first);
          acc[it->first] += vu.value[k] * it->second;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (auto v : touched) {
        const double cosine = std::min(1.0, acc[v] / (norms[u] * norms[v]));
        if (cosine > 0.0) rows[u].emplace_back(v, cosine);
        acc[v] = 0.0;
      }
    }
  });
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& [v, w] : rows[u]) net.add_edge(static_cast<NodeId>(u), v, w);
  return net;
}

std::vector<double> edge_significance(const WeightedNetwork& net) {
  std::vector<double> sig(net.edge_count(), 1.0);
  for (std::size_t i = 0; i < net.edge_count(); ++i) {
    const auto& e = net.edges()[i];
    for (NodeId end : {e.u, e.v}) {
      const std::size_t k = net.degree(end);
      if (k <= 1) continue;
      const double p = e.weight / net.strength(end);
      sig[i] = std::min(sig[i], std::pow(1.0 - p, static_cast<double>(k - 1)));
    }
  }
  return sig;
}

WeightedNetwork disparity_backbone(const WeightedNetwork& net, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("backbone alpha must be positive");
  if (alpha >= 1.0) return net.filter_edges([](std::uint32_t) { return true; });
  const auto sig = edge_significance(net);
  return net.filter_edges([&](std::uint32_t i) { return sig[i] < alpha; });
}

std::map<std::string, double> coordination_scores(const WeightedNetwork& backbone) {
  const auto& edges = backbone.edges();
  if (edges.empty()) throw DomainError("coordination scores need at least one edge");
  const double total = static_cast<double>(edges.size());

  std::vector<std::uint32_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return edges[a].weight < edges[b].weight; });

  std::vector<std::size_t> degree(backbone.node_count());
  std::vector<double> score(backbone.node_count(), 0.0);
  for (NodeId i = 0; i < backbone.node_count(); ++i) degree[i] = backbone.degree(i);

  auto disconnect = [&](NodeId node, std::size_t removed) {
    if (--degree[node] == 0) score[node] = static_cast<double>(removed) / total;
  };

  // Each step raises the threshold to the next distinct weight, removing every
  // edge lighter than it; the final step uses a virtual threshold above the
  // maximum weight.
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double w = edges[order[pos]].weight;
    std::size_t end = pos;
    while (end < order.size() && edges[order[end]].weight == w) ++end;
    for (std::size_t i = pos; i < end; ++i) {
      const auto& e = edges[order[i]];
      disconnect(e.u, end);
      disconnect(e.v, end);
    }
    pos = end;
  }

  std::map<std::string, double> out;
  for (NodeId i = 0; i < backbone.node_count(); ++i) out.emplace(backbone.name(i), score[i]);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CoordinationResult label_coordinated(const std::map<std::string, double>& scores,
                                     const std::set<std::string>& exclusions) {
  if (scores.empty()) throw DomainError("no scores to label");
  CoordinationResult r;
  r.scores = scores;
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& [_, s] : scores) values.push_back(s);
  r.threshold_used = median(std::move(values));
  for (const auto& [user, s] : scores) {
    if (!(s > r.threshold_used)) continue;
    if (exclusions.count(user))
      r.excluded.insert(user);
    else
      r.coordinated.insert(user);
  }
  return r;
}

void write_coordination_result(const CoordinationResult& result, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("user", "score", "coordinated", "community");
  for (const auto& [user, score] : result.scores) {
    auto c = result.communities.find(user);
    w.row(user, score, result.coordinated.count(user) > 0,
          static_cast<long long>(c == result.communities.end() ? kUnclustered : c->second));
  }
  write_file_atomic(path, ss.str());
}

CoordinationResult read_coordination_result(const std::filesystem::path& path) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"user", "score", "coordinated", "community"})
    throw ParseError("bad coordination header in " + path.string());
  CoordinationResult r;
  std::vector<double> values;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw ParseError("bad coordination row", i + 1);
    const double s = csv::parse_double(rows[i][1]);
    r.scores.emplace(rows[i][0], s);
    values.push_back(s);
    if (rows[i][2] == "1") r.coordinated.insert(rows[i][0]);
    r.communities.emplace(rows[i][0], static_cast<int>(csv::parse_double(rows[i][3])));
  }
  if (!values.empty()) r.threshold_used = median(values);
  return r;
}

CoordinationRun detect_coordination(const Corpus& corpus, const CoordinationSettings& settings,
                                    const std::set<std::string>& exclusions) {
  CoordinationRun run;
  run.superspreaders = select_superspreaders(corpus, settings.superspreader_fraction);
  const auto vectors = build_retweet_vectors(corpus, run.superspreaders);
  run.similarity = similarity_network(vectors);
  if (run.similarity.edge_count() == 0) throw DomainError("similarity network has no edges");
  run.backbone = disparity_backbone(run.similarity, settings.backbone_alpha);
  run.result = label_coordinated(coordination_scores(run.backbone), exclusions);
  const auto part = louvain_partition(run.backbone, settings.louvain_seed);
  for (NodeId i = 0; i < run.backbone.node_count(); ++i)
    run.result.communities.emplace(run.backbone.name(i), run.backbone.degree(i) == 0 ? kUnclustered : part[i]);
  return run;
}

}  // namespace coordnet
