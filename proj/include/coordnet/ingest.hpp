#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coordnet {

using Timestamp = std::chrono::sys_seconds;

enum class PostKind { original, retweet, reply, quote };

std::string_view to_string(PostKind kind);
PostKind parse_post_kind(std::string_view text);

/// Parses an ISO-8601 instant ("2019-11-12T08:00:00Z", optional fractional
/// seconds, optional +HH:MM offset) and normalizes it to UTC.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

struct PostRecord {
  std::string post_id;
  std::string author_id;
  Timestamp created_at{};
  PostKind kind = PostKind::original;
  std::string text;
  std::vector<std::string> hashtags;
  std::optional<std::string> referenced_post_id;
  std::optional<std::string> referenced_author_id;

  bool operator==(const PostRecord&) const = default;
};

/// Returns `#tag` tokens (a '#' followed by a maximal run of [A-Za-z0-9_]),
/// lowercased, deduplicated, in order of first occurrence.
std::vector<std::string> extract_hashtags(std::string_view text);

/// Lowercases and adds the leading '#' if missing. Throws DomainError on an
/// empty tag or characters outside [A-Za-z0-9_].
std::string normalize_hashtag(std::string_view tag);

struct SeedConfig {
  std::map<std::string, double> hashtag_leanings;
  std::map<std::string, double> account_leanings;
  std::set<std::string> excluded_accounts;
};

/// Seed CSV with three sections, each introduced by its header line:
/// `hashtag,leaning`, `account,leaning` and `excluded_account`.
SeedConfig load_seed_config(const std::filesystem::path& path);
SeedConfig parse_seed_config(std::istream& in);

/// Immutable, indexed post collection. Post handles are positions in posts().
class Corpus {
 public:
  using PostIndex = std::uint32_t;

  Corpus() = default;
  /// Validates every record; throws ParseError on a duplicate post_id or a
  /// reference-field invariant violation.
  explicit Corpus(std::vector<PostRecord> posts);

  const std::vector<PostRecord>& posts() const { return posts_; }
  std::size_t size() const { return posts_.size(); }
  bool empty() const { return posts_.empty(); }

  const PostRecord* find(std::string_view post_id) const;
  const std::map<std::string, std::vector<PostIndex>>& by_author() const { return by_author_; }
  const std::map<std::string, std::vector<PostIndex>>& by_hashtag() const { return by_hashtag_; }
  const std::map<std::string, std::size_t>& retweet_counts() const { return retweet_counts_; }

  /// Posts of one author; empty span when unknown.
  const std::vector<PostIndex>& posts_of(const std::string& author) const;

  bool operator==(const Corpus& other) const { return posts_ == other.posts_; }

 private:
  std::vector<PostRecord> posts_;
  std::unordered_map<std::string, PostIndex> id_index_;
  std::map<std::string, std::vector<PostIndex>> by_author_;
  std::map<std::string, std::vector<PostIndex>> by_hashtag_;
  std::map<std::string, std::size_t> retweet_counts_;
};

struct LoadResult {
  Corpus corpus;
  std::size_t skipped_count = 0;
};

/// Loads newline-delimited JSON records. Strict mode aborts on the first
/// malformed line; lenient mode skips and counts them. Duplicate post ids are
/// always fatal.
LoadResult load_corpus(const std::filesystem::path& path, bool strict);
LoadResult parse_corpus(std::istream& in, bool strict);

/// Parses one JSON line into a record (hashtags derived from text).
PostRecord parse_post_line(std::string_view line);

/// Serializes records in the input format, one per line.
void write_corpus(std::ostream& out, const Corpus& corpus);
std::string post_to_json_line(const PostRecord& post);

}  // namespace coordnet
