#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coordnet/ingest.hpp"

namespace coordnet {

struct HashtagBlock {
  double leaning = 0.0;
  std::vector<std::string> seed_tags;  // most popular tags of the block
  std::string generic_prefix;          // generic tags are prefix0, prefix1, ...
  std::size_t n_generic = 0;
};

/// Hourly coupling: productions at hour h + lag follow the toxicity of the
/// content coordinated users publish at hour h.
struct Coupling {
  int lag_hours = 1;
  double strength = 0.0;
};

struct SyntheticSpec {
  std::size_t n_users = 10000;
  std::size_t n_posts = 100000;

  std::size_t n_coordinated_groups = 2;
  std::size_t group_size = 50;
  std::size_t co_retweet_pool_size = 20;
  double co_retweet_rate = 0.6;    // share of a planted user's retweets taken from its group pool
  std::size_t coordinated_posts = 120;  // posts per planted user
  double coordinated_original_share = 0.15;

  // background behaviour
  double retweet_share = 0.55;
  double reply_share = 0.10;
  double quote_share = 0.05;
  double activity_exponent = 1.5;    // Pareto tail of posts per user
  double popularity_exponent = 1.0;  // Zipf exponent of original-post popularity
  double partisan_rate = 0.7;        // chance of retweeting from one's own side
  double coordinated_popularity_boost = 4.0;

  std::vector<HashtagBlock> hashtag_blocks = default_blocks();

  // mean probability that a post is heated, by cohort, with per-user spread
  double coordinated_toxicity = 0.10;
  double background_toxicity = 0.18;
  double toxicity_spread = 0.08;
  double driver_amplitude = 0.25;  // hourly swing of coordinated content toxicity

  std::optional<Coupling> coupling;
  Timestamp start = Timestamp{std::chrono::seconds{1573516800}};  // 2019-11-12T00:00:00Z
  int hours = 720;
  std::uint64_t seed = 1;

  /// Labour, neutral and Conservative blocks seeded with the campaign hashtags.
  static std::vector<HashtagBlock> default_blocks();

  /// Throws DomainError on infeasible or out-of-range settings.
  void validate() const;
};

struct GroundTruth {
  std::map<std::string, int> planted_group;  // planted user -> group index
  std::map<std::string, int> user_side;      // every user -> -1, 0 or +1
  std::map<std::string, double> hashtag_leaning;
  std::vector<double> hourly_driver;
  std::optional<Coupling> coupling;
};

struct SyntheticCorpus {
  Corpus corpus;
  GroundTruth truth;
};

SyntheticCorpus generate(const SyntheticSpec& spec);

/// planted_users.csv, user_sides.csv, hashtag_truth.csv, coupling.csv.
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir);

}  // namespace coordnet
