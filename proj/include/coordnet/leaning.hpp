#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coordnet/ingest.hpp"
#include "coordnet/network.hpp"

namespace coordnet {

/// Hashtag co-occurrence network: one node per hashtag seen in any post, edge
/// weight = number of posts containing both hashtags.
WeightedNetwork build_cooccurrence(const Corpus& corpus);

/// `steps` values spaced evenly in log10 from `start` to `end`, inclusive.
std::vector<double> alpha_schedule(double start, double end = 1.0, int steps = 13);

struct PropagationResult {
  std::map<std::string, double> leaning;
  std::set<std::string> undefined_final;  // forced to 0 after the last step
  std::vector<std::string> missing_seeds;  // seeds not present in the network
  std::vector<std::size_t> defined_per_step;
};

/// Label propagation over progressively softer disparity backbones. At each
/// step every still-undefined node with backbone edges takes the
/// co-occurrence-weighted mean of its neighbours' leanings, where neighbours
/// undefined at the start of the step count as 0. Defined values are frozen;
/// seeds never change.
PropagationResult propagate_labels(const WeightedNetwork& net, const std::map<std::string, double>& seeds,
                                   const std::vector<double>& schedule);

/// Leaning of the post's hashtag with the largest |leaning|; ties in |leaning|
/// average the tied values. No known hashtag -> nullopt.
std::optional<double> post_leaning(const PostRecord& post, const std::map<std::string, double>& hashtag_leaning);

/// Mean post leaning over each user's originals and retweets with a defined
/// leaning. Users without such posts are absent.
std::map<std::string, double> user_leaning(const Corpus& corpus,
                                           const std::map<std::string, std::optional<double>>& post_leaning);

struct LeaningTable {
  std::map<std::string, double> hashtag_leaning;
  std::map<std::string, double> post_leaning;
  std::map<std::string, double> user_leaning;
  std::set<std::string> undefined_hashtags_final;
};

/// Co-occurrence network, propagation, post and user leanings in one call.
LeaningTable infer_leaning(const Corpus& corpus, const std::map<std::string, double>& seeds,
                           const std::vector<double>& schedule);

/// Writes `hashtag,leaning`, `post_id,leaning`, `user,leaning` files into `dir`.
void write_leaning_table(const LeaningTable& table, const std::filesystem::path& dir);
LeaningTable read_leaning_table(const std::filesystem::path& dir);

}  // namespace coordnet
