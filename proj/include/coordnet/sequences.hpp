#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "coordnet/ingest.hpp"
#include "coordnet/stats.hpp"
#include "coordnet/toxicity.hpp"

namespace coordnet {

enum class ActionKind { P, I };

struct ActionStep {
  ActionKind kind;
  std::string post_id;  // the user's own post
  std::optional<std::string> referenced_post_id;  // interacted post, I steps only
  Timestamp timestamp{};
};

struct UserActivitySequence {
  std::string user;
  std::vector<ActionStep> steps;

  /// "P>I>I>P" rendering.
  std::string encoded() const;
};

/// Chronological P/I encoding (ties by post_id): original -> P, retweet -> I,
/// reply and quote -> I on the referenced post followed by P.
UserActivitySequence encode_actions(const std::string& user, std::vector<const PostRecord*> posts);

/// Drops the leading P-run and the trailing I-run; nullopt unless some I is
/// followed by a P.
std::optional<UserActivitySequence> trim_sequence(const UserActivitySequence& seq);

/// Toxicity, author and leaning of what a step interacted with. The
/// referenced record is preferred; a retweet without a scored or leaning-bearing
/// referenced record falls back to its own record, which carries the same text.
struct InteractionContext {
  const Corpus* corpus = nullptr;
  const ToxicityTable* toxicity = nullptr;
  const std::set<std::string>* coordinated = nullptr;
  const std::map<std::string, double>* post_leaning = nullptr;

  std::optional<double> toxicity_of(const ActionStep& step) const;
  std::optional<double> leaning_of(const ActionStep& step) const;
  bool coordinated_author(const ActionStep& step) const;
};

struct InteractionBlock {
  double toxic_fraction = 0.0;
  double coordinated_fraction = 0.0;
  std::optional<double> mean_leaning;
  std::size_t n = 0;         // interacted posts
  std::size_t n_scored = 0;  // with a toxicity score
  std::size_t n_toxic = 0;   // score > threshold
  std::size_t n_below = 0;   // score < threshold
};

struct ProductionBlock {
  double mean_toxicity = 0.0;
  std::size_t n = 0;  // scored productions averaged
};

struct BlockPair {
  std::string user;
  std::size_t pair_index = 0;
  InteractionBlock interaction;
  ProductionBlock production;
};

/// Pairs each maximal I-run with the following P-run. Pairs with no scored
/// interaction or no scored production are dropped; pair_index counts the
/// retained pairs.
std::vector<BlockPair> segment_blocks(const UserActivitySequence& trimmed, const InteractionContext& ctx,
                                      double toxic_threshold = 0.6);

/// Block pairs of every user outside `coordinated`, in user order.
std::vector<BlockPair> collect_block_pairs(const InteractionContext& ctx, double toxic_threshold = 0.6);

enum class Condition { author_group, toxicity_class, leaning_align };

/// Class labels of one pair under a condition; empty when the pair is impure
/// or otherwise excluded. author_group gives "coordinated"/"non_coordinated";
/// toxicity_class gives "toxic"/"non_toxic" and the crossed
/// "toxic:coordinated" style label for author-pure pairs; leaning_align gives
/// "same_leaning"/"opposite_leaning" and its crossed label likewise.
std::vector<std::string> condition_labels(const BlockPair& pair, Condition condition,
                                          const std::map<std::string, double>& user_leaning);

/// Bootstrap mean of production toxicity per condition label.
std::map<std::string, BootstrapSummary> conditioned_means(std::span<const BlockPair> pairs, Condition condition,
                                                          const std::map<std::string, double>& user_leaning,
                                                          int replicates, std::uint64_t seed);

/// Export `user,pair_index,toxic_fraction,coordinated_fraction,mean_leaning,
/// production_mean_toxicity,n_interactions,n_productions`.
void write_block_pairs(std::span<const BlockPair> pairs, const std::filesystem::path& path);

struct TimedValue {
  Timestamp timestamp{};
  double value = 0.0;
};

/// Scored productions and interactions of users outside `coordinated`.
struct ActionStreams {
  std::vector<TimedValue> productions;
  std::vector<TimedValue> interactions;
  std::vector<TimedValue> coordinated_interactions;  // interacted author coordinated
};

ActionStreams collect_action_streams(const InteractionContext& ctx);

}  // namespace coordnet
