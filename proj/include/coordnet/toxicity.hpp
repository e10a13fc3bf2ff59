#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "coordnet/ingest.hpp"

namespace coordnet {

/// Lowercases ASCII letters, strips hashtags, @-mentions, URLs and emoji,
/// collapses whitespace. A token whose remainder after stripping has no
/// alphanumeric character (e.g. the ':' of "@user:") is dropped entirely.
std::string preprocess_text(std::string_view text);

/// True for codepoints in the emoji property classes (Extended_Pictographic,
/// modifiers, regional indicators, joiners and selectors). ASCII is never emoji.
bool is_emoji_codepoint(char32_t cp);

// ---------------------------------------------------------------------------
// Offline lexicon scorer

class OfflineLexicon {
 public:
  /// The lexicon compiled into the library from data/toxicity_lexicon.tsv.
  static const OfflineLexicon& bundled();
  /// SHA-256 of the bundled lexicon file contents.
  static std::string bundled_sha256();

  static OfflineLexicon parse(std::string_view tsv);

  double bias() const { return bias_; }
  double gain() const { return gain_; }
  int version() const { return version_; }
  const std::map<std::string, double>& weights() const { return weights_; }

  /// Sum of lexicon weights over the tokens of `text` (before normalization).
  double hit_score(std::string_view text) const;
  /// logistic(bias + gain * hit_score / token_count).
  double score(std::string_view text) const;

 private:
  std::map<std::string, double> weights_;
  double bias_ = 0.0;
  double gain_ = 1.0;
  int version_ = 0;
};

/// Deterministic offline toxicity of already-preprocessed text.
double offline_score(std::string_view text);

// ---------------------------------------------------------------------------
// Score table and cache

enum class UnscoredReason { empty_after_preprocessing, unsupported_language, service_error };

std::string_view to_string(UnscoredReason reason);
UnscoredReason parse_unscored_reason(std::string_view text);

struct ToxicityTable {
  std::map<std::string, double> scores;
  std::map<std::string, UnscoredReason> unscored;

  std::optional<double> find(const std::string& post_id) const {
    auto it = scores.find(post_id);
    if (it == scores.end()) return std::nullopt;
    return it->second;
  }
  /// True when the post has a final outcome (service errors are retried).
  bool settled(const std::string& post_id) const;
};

/// Cache format: `post_id,toxicity` plus sidecar `post_id,reason`.
void save_toxicity_table(const ToxicityTable& table, const std::filesystem::path& scores_path,
                         const std::filesystem::path& unscored_path);
/// Throws ParseError when either file is corrupt (bad header, bad number,
/// score outside [0,1], duplicate or overlapping ids).
ToxicityTable load_toxicity_table(const std::filesystem::path& scores_path,
                                  const std::filesystem::path& unscored_path);

// ---------------------------------------------------------------------------
// Scoring service plumbing

enum class ScorerMode { remote, offline };

struct ScorerConfig {
  ScorerMode mode = ScorerMode::offline;
  std::string endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
  std::string api_key_env = "PERSPECTIVE_API_KEY";
  double max_qps = 1.0;
  int max_retries = 3;
  int batch_concurrency = 1;
  /// First retry delay; doubles on every further attempt.
  double backoff_seconds = 1.0;

  void validate() const;
};

/// Monotonic time source in seconds. Replaceable so rate limiting and backoff
/// can be exercised on a simulated clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep_until(double t) = 0;
  void sleep_for(double seconds) { sleep_until(now() + seconds); }
};

class SteadyClock final : public Clock {
 public:
  double now() override;
  void sleep_until(double t) override;
};

/// Virtual time: sleeping advances the clock instantly.
class SimulatedClock final : public Clock {
 public:
  double now() override;
  void sleep_until(double t) override;

 private:
  std::mutex mu_;
  double now_ = 0.0;
};

/// Token bucket with a burst of one: request slots are reserved at least
/// 1/max_qps apart, and any half-open 1-second window holds at most
/// ceil(max_qps) requests.
class RateLimiter {
 public:
  RateLimiter(double max_qps, Clock& clock);
  /// Blocks until the caller may issue a request; returns the slot time.
  double acquire();

 private:
  Clock& clock_;
  double interval_;
  double next_free_;
  bool started_ = false;
  std::size_t burst_;
  std::deque<double> recent_;
  std::mutex mu_;
};

struct ScoreOutcome {
  enum class Status { ok, unsupported_language, retryable_error, fatal_error };
  Status status = Status::ok;
  double value = 0.0;
  std::string message;
};

/// One scoring request. Implementations must be safe to call concurrently.
class ToxicityBackend {
 public:
  virtual ~ToxicityBackend() = default;
  virtual ScoreOutcome score(const std::string& preprocessed_text) = 0;
};

class OfflineBackend final : public ToxicityBackend {
 public:
  ScoreOutcome score(const std::string& preprocessed_text) override;
};

/// HTTP client for a Perspective-style `comments:analyze` endpoint.
class RemoteBackend final : public ToxicityBackend {
 public:
  RemoteBackend(std::string endpoint, std::string api_key, double timeout_seconds = 30.0);
  ScoreOutcome score(const std::string& preprocessed_text) override;

  /// Request body for one text.
  static std::string request_body(std::string_view text);
  /// Interprets an HTTP status + body; exposed for testing.
  static ScoreOutcome interpret_response(int http_status, std::string_view body);

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  double timeout_seconds_;
};

struct ScoringStats {
  std::size_t requests = 0;
  std::size_t retries = 0;
  std::size_t cached = 0;
};

/// Scores every corpus post not settled in `cache`; the cache entries are
/// merged into the result. Empty-after-preprocessing posts are never sent.
ToxicityTable score_posts(const Corpus& corpus, const ScorerConfig& config, const ToxicityTable* cache,
                          ToxicityBackend& backend, Clock& clock, ScoringStats* stats = nullptr);

/// Builds the backend from `config` (remote mode reads the API key from the
/// environment variable it names; throws Error when unset).
ToxicityTable score_posts(const Corpus& corpus, const ScorerConfig& config, const ToxicityTable* cache,
                          ScoringStats* stats = nullptr);

}  // namespace coordnet
