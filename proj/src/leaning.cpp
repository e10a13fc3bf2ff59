#include "coordnet/leaning.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "coordnet/coordination.hpp"
#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

WeightedNetwork build_cooccurrence(const Corpus& corpus) {
  WeightedNetwork net;
  for (const auto& [tag, _] : corpus.by_hashtag()) net.add_node(tag);
  std::map<std::pair<NodeId, NodeId>, double> counts;
  for (const auto& post : corpus.posts()) {
    const auto& tags = post.hashtags;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const NodeId a = *net.find(tags[i]);
      for (std::size_t j = i + 1; j < tags.size(); ++j) {
        const NodeId b = *net.find(tags[j]);
        counts[{std::min(a, b), std::max(a, b)}] += 1.0;
      }
    }
  }
  for (const auto& [key, w] : counts) net.add_edge(key.first, key.second, w);
  return net;
}

std::vector<double> alpha_schedule(double start, double end, int steps) {
  if (!(start > 0.0) || !(start < end) || end > 1.0) throw DomainError("alpha schedule needs 0 < start < end <= 1");
  if (steps < 2) throw DomainError("alpha schedule needs at least 2 steps");
  const double lo = std::log10(start), hi = std::log10(end);
  std::vector<double> out(steps);
  for (int i = 0; i < steps; ++i) out[i] = std::pow(10.0, lo + (hi - lo) * i / (steps - 1));
  out.front() = start;
  out.back() = end;
  for (int i = 1; i < steps; ++i)
    if (!(out[i] > out[i - 1])) throw DomainError("alpha schedule is not strictly increasing");
  return out;
}

PropagationResult propagate_labels(const WeightedNetwork& net, const std::map<std::string, double>& seeds,
                                   const std::vector<double>& schedule) {
  if (schedule.empty()) throw DomainError("empty alpha schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i - 1])) throw DomainError("alpha schedule must be ascending");

  PropagationResult result;
  const std::size_t n = net.node_count();
  std::vector<double> value(n, 0.0);
  std::vector<char> defined(n, 0);
  std::size_t n_defined = 0;
  for (const auto& [tag, v] : seeds) {
    auto id = net.find(tag);
    if (!id) {
      result.missing_seeds.push_back(tag);
      continue;
    }
    value[*id] = v;
    defined[*id] = 1;
    ++n_defined;
  }

  const auto significance = edge_significance(net);
  std::vector<double> num(n), den(n);
  for (double alpha : schedule) {
    if (n_defined == n) break;
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(den.begin(), den.end(), 0.0);
    for (std::size_t i = 0; i < net.edge_count(); ++i) {
      if (alpha < 1.0 && !(significance[i] < alpha)) continue;
      const auto& e = net.edges()[i];
      // undefined neighbours contribute 0 but keep their weight
      if (!defined[e.u]) {
        num[e.u] += e.weight * (defined[e.v] ? value[e.v] : 0.0);
        den[e.u] += e.weight;
      }
      if (!defined[e.v]) {
        num[e.v] += e.weight * (defined[e.u] ? value[e.u] : 0.0);
        den[e.v] += e.weight;
      }
    }
    std::vector<NodeId> updated;
    for (NodeId i = 0; i < n; ++i)
      if (!defined[i] && den[i] > 0.0) updated.push_back(i);
    for (NodeId i : updated) {
      value[i] = num[i] / den[i];
      defined[i] = 1;
    }
    n_defined += updated.size();
    result.defined_per_step.push_back(n_defined);
  }

  for (NodeId i = 0; i < n; ++i) {
    if (!defined[i]) result.undefined_final.insert(net.name(i));
    result.leaning.emplace(net.name(i), defined[i] ? value[i] : 0.0);
  }
  return result;
}

std::optional<double> post_leaning(const PostRecord& post, const std::map<std::string, double>& hashtag_leaning) {
  double best_abs = -1.0;
  double sum = 0.0;
  int tied = 0;
  for (const auto& tag : post.hashtags) {
    auto it = hashtag_leaning.find(tag);
    if (it == hashtag_leaning.end()) continue;
    const double a = std::fabs(it->second);
    if (a > best_abs) {
      best_abs = a;
      sum = it->second;
      tied = 1;
    } else if (a == best_abs) {
      sum += it->second;
      ++tied;
    }
  }
  if (tied == 0) return std::nullopt;
  return sum / tied;
}

std::map<std::string, double> user_leaning(const Corpus& corpus,
                                           const std::map<std::string, std::optional<double>>& post_leaning) {
  std::map<std::string, double> out;
  for (const auto& [user, indices] : corpus.by_author()) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto idx : indices) {
      const auto& p = corpus.posts()[idx];
      if (p.kind != PostKind::original && p.kind != PostKind::retweet) continue;
      auto it = post_leaning.find(p.post_id);
      if (it == post_leaning.end() || !it->second) continue;
      sum += *it->second;
      ++count;
    }
    if (count > 0) out.emplace(user, sum / static_cast<double>(count));
  }
  return out;
}

LeaningTable infer_leaning(const Corpus& corpus, const std::map<std::string, double>& seeds,
                           const std::vector<double>& schedule) {
  const auto net = build_cooccurrence(corpus);
  auto prop = propagate_labels(net, seeds, schedule);
  LeaningTable table;
  table.hashtag_leaning = std::move(prop.leaning);
  table.undefined_hashtags_final = std::move(prop.undefined_final);
  std::map<std::string, std::optional<double>> per_post;
  for (const auto& p : corpus.posts()) {
    auto l = post_leaning(p, table.hashtag_leaning);
    per_post.emplace(p.post_id, l);
    if (l) table.post_leaning.emplace(p.post_id, *l);
  }
  table.user_leaning = user_leaning(corpus, per_post);
  return table;
}

namespace {

void write_map(const std::map<std::string, double>& m, const char* key, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row(key, "leaning");
  for (const auto& [k, v] : m) w.row(k, v);
  write_file_atomic(path, ss.str());
}

std::map<std::string, double> read_map(const char* key, const std::filesystem::path& path) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{key, "leaning"})
    throw ParseError("bad leaning header in " + path.string());
  std::map<std::string, double> m;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw ParseError("bad leaning row", i + 1);
    m.emplace(rows[i][0], csv::parse_double(rows[i][1]));
  }
  return m;
}

}  // namespace

void write_leaning_table(const LeaningTable& table, const std::filesystem::path& dir) {
  write_map(table.hashtag_leaning, "hashtag", dir / "hashtag_leaning.csv");
  write_map(table.post_leaning, "post_id", dir / "post_leaning.csv");
  write_map(table.user_leaning, "user", dir / "user_leaning.csv");
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("hashtag");
  for (const auto& t : table.undefined_hashtags_final) w.row(t);
  write_file_atomic(dir / "undefined_hashtags.csv", ss.str());
}

LeaningTable read_leaning_table(const std::filesystem::path& dir) {
  LeaningTable t;
  t.hashtag_leaning = read_map("hashtag", dir / "hashtag_leaning.csv");
  t.post_leaning = read_map("post_id", dir / "post_leaning.csv");
  t.user_leaning = read_map("user", dir / "user_leaning.csv");
  auto rows = csv::read_file(dir / "undefined_hashtags.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) t.undefined_hashtags_final.insert(rows[i].at(0));
  return t;
}

}  // namespace coordnet
