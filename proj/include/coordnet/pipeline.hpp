#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coordnet/error.hpp"

namespace coordnet {

struct PipelineConfig {
  // [paths]; relative paths resolve against base_dir
  std::string corpus = "corpus.jsonl";
  std::string seeds = "seeds.csv";
  std::string cache_dir = "cache";
  std::string output_dir = "out";

  // [ingest]
  bool strict = true;

  // [toxicity]
  std::string toxicity_mode = "remote";  // remote | offline
  std::string endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
  std::string api_key_env = "PERSPECTIVE_API_KEY";
  double max_qps = 1.0;
  int max_retries = 3;
  int batch_concurrency = 1;
  double backoff_seconds = 1.0;

  // [coordination]
  double superspreader_fraction = 0.01;
  double backbone_alpha = 0.05;

  // [leaning]
  double alpha_start = 1e-4;
  double alpha_end = 1.0;
  int alpha_steps = 13;

  // [metrics]
  double top_fraction = 0.10;
  int min_activity = 5;

  // [sequences]
  double toxic_threshold = 0.6;
  int sequence_replicates = 50000;

  // [stats]
  int bootstrap_replicates = 50000;
  int spearman_replicates = 10000;
  int shuffles = 10000;
  int ad_simulations = 10000;
  double loess_span = 0.75;
  int clusters = 3;

  // [te]
  double te_q = 0.5;
  int te_history = 1;
  int te_bootstraps = 300;
  std::vector<double> te_probs = {0.05, 0.5, 0.95};

  // [report]
  int joint_bins = 20;
  bool svg = false;

  // [run]
  std::uint64_t seed = 1;

  std::filesystem::path base_dir;  // not serialized

  bool operator==(const PipelineConfig& other) const;

  /// Throws DomainError naming the first field outside its domain.
  void validate() const;

  std::filesystem::path resolve(const std::string& path) const;
};

/// key = value lines under [section] headers; '#' starts a comment line.
/// Unknown sections or keys are errors (ParseError with line number).
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& config);

class DependencyError : public Error {
 public:
  using Error::Error;
};

enum class Stage { ingest, tox, coord, leaning, metrics, compare, sequences, te, report };

const std::vector<Stage>& all_stages();
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& dependencies(Stage stage);

struct RunOptions {
  bool offline_toxicity = false;
  bool svg = false;
  std::function<void(std::string_view)> log;  // progress lines; may be empty
};

struct StageOutcome {
  Stage stage;
  bool skipped = false;  // fingerprint and artifacts unchanged
};

/// Runs one stage. Upstream stages must already have current stamps;
/// otherwise DependencyError names the missing or stale stage.
StageOutcome run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options = {});

/// Runs every stage in dependency order, skipping up-to-date ones.
std::vector<StageOutcome> run_all(const PipelineConfig& config, const RunOptions& options = {});

/// Held while a pipeline runs in an output directory; created exclusively.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& output_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace coordnet
