#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coordnet/ingest.hpp"
#include "coordnet/network.hpp"

namespace coordnet {

/// Top ceil(fraction * R) users by retweet count, R = users with at least one
/// retweet. Ties at the cutoff go to the lexicographically smaller id.
/// Returned sorted by id. Throws DomainError when nobody retweets.
std::vector<std::string> select_superspreaders(const Corpus& corpus, double fraction);

struct SparseVector {
  std::vector<std::uint32_t> index;  // strictly increasing term ids
  std::vector<double> value;         // nonzero

  std::size_t size() const { return index.size(); }
  bool empty() const { return index.empty(); }
  double norm() const;
};

/// TF-IDF vectors over retweeted post ids. Term id i names post_ids[i].
struct RetweetVectors {
  std::vector<std::string> post_ids;
  std::map<std::string, SparseVector> by_user;

  /// Weight of (user, post), 0 when absent.
  double weight(const std::string& user, const std::string& post_id) const;
};

/// tf(u,t) = times u retweeted t; idf(t) = ln(N / df(t)) with N = |users|.
/// Terms with idf 0 are dropped; users without retweets get an empty vector.
RetweetVectors build_retweet_vectors(const Corpus& corpus, const std::vector<std::string>& users);

/// Cosine similarity network over users, computed through an inverted index
/// so only pairs sharing a retweeted post are compared. Users with empty
/// vectors are isolated nodes. Nodes are inserted in user-id order.
WeightedNetwork similarity_network(const RetweetVectors& vectors);

/// Disparity-filter significance of every edge, indexed like net.edges():
/// min over endpoints with degree k > 1 of (1 - w / strength)^(k - 1), or 1
/// when neither endpoint qualifies.
std::vector<double> edge_significance(const WeightedNetwork& net);

/// Keeps edges whose significance is < alpha; alpha >= 1 keeps every edge.
/// All nodes are retained.
WeightedNetwork disparity_backbone(const WeightedNetwork& net, double alpha);

/// Moving-threshold coordination scores. Thresholds sweep the distinct edge
/// weights in ascending order; edges lighter than the threshold are removed
/// and a node left without edges scores the fraction of backbone edges
/// lighter than that threshold. Nodes still connected after the heaviest
/// weight score 1; nodes isolated from the start score 0.
std::map<std::string, double> coordination_scores(const WeightedNetwork& backbone);

inline constexpr int kUnclustered = -1;

struct CoordinationResult {
  std::map<std::string, double> scores;
  std::set<std::string> coordinated;
  std::map<std::string, int> communities;
  double threshold_used = 0.0;
  std::set<std::string> excluded;
};

/// Median of the score values (mean of the two middle values for even n).
double median(std::vector<double> values);

/// coordinated = {u : score > median} minus exclusions; `excluded` records the
/// exclusions that were actually above the threshold.
CoordinationResult label_coordinated(const std::map<std::string, double>& scores,
                                     const std::set<std::string>& exclusions);

/// Export `user,score,coordinated,community`.
void write_coordination_result(const CoordinationResult& result, const std::filesystem::path& path);
CoordinationResult read_coordination_result(const std::filesystem::path& path);

struct CoordinationSettings {
  double superspreader_fraction = 0.01;
  double backbone_alpha = 0.05;
  std::uint64_t louvain_seed = 1;
};

struct CoordinationRun {
  std::vector<std::string> superspreaders;
  WeightedNetwork similarity;
  WeightedNetwork backbone;
  CoordinationResult result;
};

/// Full detection: superspreaders, vectors, similarity, backbone, scores,
/// median labeling and Louvain communities (isolated nodes get kUnclustered).
CoordinationRun detect_coordination(const Corpus& corpus, const CoordinationSettings& settings,
                                    const std::set<std::string>& exclusions);

}  // namespace coordnet
