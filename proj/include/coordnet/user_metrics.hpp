#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

#include "coordnet/ingest.hpp"
#include "coordnet/toxicity.hpp"

namespace coordnet {

struct ScoredPost {
  PostKind kind;
  std::optional<double> toxicity;
};

struct UserToxicity {
  double value = 0.0;
  std::size_t n_posts_considered = 0;
  std::size_t n_top_used = 0;
};

/// Mean of the top max(1, ceil(top_fraction * n)) toxicities among the
/// eligible posts (originals and, unless excluded, retweets, with a score).
/// nullopt when no post is eligible.
std::optional<UserToxicity> user_toxicity(std::span<const ScoredPost> posts, double top_fraction = 0.10,
                                          bool include_retweets = true);

/// Users whose count is at least `minimum`.
std::set<std::string> filter_min_activity(const std::map<std::string, std::size_t>& counts,
                                          std::size_t minimum = 5);

/// Number of originals + retweets per author.
std::map<std::string, std::size_t> activity_counts(const Corpus& corpus);

/// user_toxicity for every author with at least one eligible post.
std::map<std::string, UserToxicity> all_user_toxicity(const Corpus& corpus, const ToxicityTable& toxicity,
                                                      double top_fraction = 0.10, bool include_retweets = true);

/// Export `user,toxicity,n_posts,n_top`.
void write_user_toxicity(const std::map<std::string, UserToxicity>& table, const std::filesystem::path& path);
std::map<std::string, UserToxicity> read_user_toxicity(const std::filesystem::path& path);

}  // namespace coordnet
