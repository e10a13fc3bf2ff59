#include "coordnet/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "coordnet/coordination.hpp"
#include "coordnet/csv.hpp"
#include "coordnet/ingest.hpp"
#include "coordnet/leaning.hpp"
#include "coordnet/network.hpp"
#include "coordnet/report.hpp"
#include "coordnet/sequences.hpp"
#include "coordnet/stats.hpp"
#include "coordnet/toxicity.hpp"
#include "coordnet/transfer_entropy.hpp"
#include "coordnet/user_metrics.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

namespace fs = std::filesystem;

namespace {

constexpr int kStageVersion = 1;

// Seed offsets of the randomized analyses, so each draws an independent stream.
enum SeedSlot : std::uint64_t {
  kSeedBootstrap = 100,
  kSeedAnderson = 110,
  kSeedSpearman = 120,
  kSeedShuffle = 160,
  kSeedSequences = 200,
  kSeedTransfer = 300,
};

const std::vector<Stage> kStages = {Stage::ingest,  Stage::tox,     Stage::coord,     Stage::leaning, Stage::metrics,
                                    Stage::compare, Stage::sequences, Stage::te, Stage::report};

}  // namespace

const std::vector<Stage>& all_stages() { return kStages; }

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::tox: return "tox";
    case Stage::coord: return "coord";
    case Stage::leaning: return "leaning";
    case Stage::metrics: return "metrics";
    case Stage::compare: return "compare";
    case Stage::sequences: return "sequences";
    case Stage::te: return "te";
    case Stage::report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kStages)
    if (to_string(s) == name) return s;
  throw DomainError("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& dependencies(Stage stage) {
  static const std::map<Stage, std::vector<Stage>> deps = {
      {Stage::ingest, {}},
      {Stage::tox, {Stage::ingest}},
      {Stage::coord, {Stage::ingest}},
      {Stage::leaning, {Stage::ingest}},
      {Stage::metrics, {Stage::ingest, Stage::tox}},
      {Stage::compare, {Stage::ingest, Stage::coord, Stage::leaning, Stage::metrics}},
      {Stage::sequences, {Stage::ingest, Stage::tox, Stage::coord, Stage::leaning}},
      {Stage::te, {Stage::ingest, Stage::tox, Stage::coord}},
      {Stage::report,
       {Stage::ingest, Stage::tox, Stage::coord, Stage::leaning, Stage::metrics, Stage::compare, Stage::sequences,
        Stage::te}},
  };
  return deps.at(stage);
}

OutputLock::OutputLock(const fs::path& output_dir) : path_(output_dir / ".lock") {
  fs::create_directories(output_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw Error("output directory " + output_dir.string() + " is in use by another run (remove " + path_.string() +
                  " if that run is gone)");
    throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

std::string csv_text(const std::function<void(csv::Writer&)>& body) {
  std::ostringstream ss;
  csv::Writer w(ss);
  body(w);
  return ss.str();
}

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

class Runner {
 public:
  Runner(const PipelineConfig& config, const RunOptions& options)
      : cfg_(config), opts_(options), out_(config.resolve(config.output_dir)) {}

  const fs::path& out() const { return out_; }

  StageOutcome run(Stage stage) {
    for (Stage dep : dependencies(stage)) {
      std::string why;
      if (!stamp_current(dep, &why))
        throw DependencyError("stage '" + std::string(to_string(stage)) + "' needs stage '" +
                              std::string(to_string(dep)) + "': " + why);
    }
    if (stamp_current(stage, nullptr)) {
      log(std::string(to_string(stage)) + ": up to date");
      return {stage, true};
    }
    log(std::string(to_string(stage)) + ": running");
    fs::create_directories(out_ / to_string(stage));
    std::vector<std::string> artifacts;
    switch (stage) {
      case Stage::ingest: artifacts = ingest(); break;
      case Stage::tox: artifacts = tox(); break;
      case Stage::coord: artifacts = coord(); break;
      case Stage::leaning: artifacts = leaning(); break;
      case Stage::metrics: artifacts = metrics(); break;
      case Stage::compare: artifacts = compare(); break;
      case Stage::sequences: artifacts = sequences(); break;
      case Stage::te: artifacts = te(); break;
      case Stage::report: artifacts = report(); break;
    }
    write_stamp(stage, artifacts);
    return {stage, false};
  }

 private:
  // ---- fingerprints and stamps ------------------------------------------

  std::string toxicity_mode() const { return opts_.offline_toxicity ? "offline" : cfg_.toxicity_mode; }
  bool svg() const { return opts_.svg || cfg_.svg; }

  std::string stage_settings(Stage stage) {
    std::ostringstream s;
    auto d = [](double v) { return csv::format_double(v); };
    switch (stage) {
      case Stage::ingest:
        s << "strict=" << cfg_.strict << "\ncorpus=" << sha256_file(cfg_.resolve(cfg_.corpus))
          << "\nseeds=" << sha256_file(cfg_.resolve(cfg_.seeds));
        break;
      case Stage::tox:
        s << "mode=" << toxicity_mode();
        if (toxicity_mode() == "offline")
          s << "\nlexicon=" << OfflineLexicon::bundled_sha256();
        else
          s << "\nendpoint=" << cfg_.endpoint;
        break;
      case Stage::coord:
        s << "fraction=" << d(cfg_.superspreader_fraction) << "\nalpha=" << d(cfg_.backbone_alpha)
          << "\nseed=" << cfg_.seed;
        break;
      case Stage::leaning:
        s << "schedule=" << d(cfg_.alpha_start) << "," << d(cfg_.alpha_end) << "," << cfg_.alpha_steps;
        break;
      case Stage::metrics:
        s << "top_fraction=" << d(cfg_.top_fraction);
        break;
      case Stage::compare:
        s << "min_activity=" << cfg_.min_activity << "\nbootstrap=" << cfg_.bootstrap_replicates
          << "\nspearman=" << cfg_.spearman_replicates << "\nshuffles=" << cfg_.shuffles
          << "\nad=" << cfg_.ad_simulations << "\nclusters=" << cfg_.clusters << "\nseed=" << cfg_.seed;
        break;
      case Stage::sequences:
        s << "threshold=" << d(cfg_.toxic_threshold) << "\nreplicates=" << cfg_.sequence_replicates
          << "\nseed=" << cfg_.seed;
        break;
      case Stage::te:
        s << "q=" << d(cfg_.te_q) << "\nhistory=" << cfg_.te_history << "\nbootstraps=" << cfg_.te_bootstraps
          << "\nprobs=";
        for (double p : cfg_.te_probs) s << d(p) << ",";
        s << "\nseed=" << cfg_.seed;
        break;
      case Stage::report:
        s << "bins=" << cfg_.joint_bins << "\nspan=" << d(cfg_.loess_span) << "\nsvg=" << svg()
          << "\nclusters=" << cfg_.clusters << "\nmin_activity=" << cfg_.min_activity;
        break;
    }
    return s.str();
  }

  std::string fingerprint(Stage stage) {
    if (auto it = fingerprints_.find(stage); it != fingerprints_.end()) return it->second;
    std::string text = "stage=" + std::string(to_string(stage)) + "\nversion=" + std::to_string(kStageVersion) + "\n" +
                       stage_settings(stage) + "\n";
    for (Stage dep : dependencies(stage)) text += std::string(to_string(dep)) + "=" + fingerprint(dep) + "\n";
    return fingerprints_[stage] = sha256_hex(text);
  }

  fs::path stamp_path(Stage stage) const { return out_ / to_string(stage) / "stamp.json"; }

  bool stamp_current(Stage stage, std::string* why) {
    auto fail = [&](const std::string& reason) {
      if (why) *why = reason;
      return false;
    };
    const auto path = stamp_path(stage);
    if (!fs::exists(path)) return fail("it has not been run");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const std::exception&) {
      return fail("its stamp is unreadable");
    }
    if (j.value("fingerprint", "") != fingerprint(stage)) return fail("it is out of date");
    for (const auto& [rel, hash] : j.at("artifacts").items()) {
      const auto file = out_ / rel;
      if (!fs::exists(file) || sha256_file(file) != hash.get<std::string>())
        return fail("artifact " + rel + " is missing or modified");
    }
    return true;
  }

  void write_stamp(Stage stage, const std::vector<std::string>& artifacts) {
    nlohmann::ordered_json j;
    j["stage"] = std::string(to_string(stage));
    j["version"] = kStageVersion;
    j["fingerprint"] = fingerprint(stage);
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& rel : artifacts) files[rel] = sha256_file(out_ / rel);
    j["artifacts"] = files;
    write_file_atomic(stamp_path(stage), j.dump(2) + "\n");
  }

  void log(const std::string& line) const {
    if (opts_.log) opts_.log(line);
  }

  // ---- artifact helpers ---------------------------------------------------

  std::string put(Stage stage, const std::string& name, std::string_view contents) {
    const std::string rel = std::string(to_string(stage)) + "/" + name;
    write_file_atomic(out_ / rel, contents);
    return rel;
  }

  fs::path at(Stage stage, const std::string& name) const { return out_ / to_string(stage) / name; }

  const Corpus& corpus() {
    if (!corpus_) corpus_ = load_corpus(at(Stage::ingest, "corpus.jsonl"), true).corpus;
    return *corpus_;
  }

  SeedConfig seeds() { return load_seed_config(at(Stage::ingest, "seeds.csv")); }

  const ToxicityTable& toxicity() {
    if (!toxicity_) toxicity_ = load_toxicity_table(at(Stage::tox, "toxicity.csv"), at(Stage::tox, "unscored.csv"));
    return *toxicity_;
  }

  std::vector<std::string> read_list(const fs::path& path) {
    std::vector<std::string> out;
    auto rows = csv::read_file(path);
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(rows[i].at(0));
    return out;
  }

  struct Activity {
    std::size_t originals = 0, retweets = 0, replies = 0, quotes = 0;
    std::size_t original_or_retweet() const { return originals + retweets; }
  };

  std::map<std::string, Activity> activity() {
    std::map<std::string, Activity> out;
    auto rows = csv::read_file(at(Stage::metrics, "activity.csv"));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      auto n = [&](std::size_t k) { return static_cast<std::size_t>(csv::parse_double(r.at(k))); };
      out.emplace(r.at(0), Activity{n(1), n(2), n(3), n(4)});
    }
    return out;
  }

  // ---- stages ---------------------------------------------------------------

  std::vector<std::string> ingest() {
    const auto loaded = load_corpus(cfg_.resolve(cfg_.corpus), cfg_.strict);
    if (loaded.skipped_count) log("ingest: skipped " + std::to_string(loaded.skipped_count) + " malformed lines");
    const auto seed_text = read_file(cfg_.resolve(cfg_.seeds));
    {
      std::istringstream in(seed_text);
      parse_seed_config(in);
    }
    std::ostringstream corpus_text;
    write_corpus(corpus_text, loaded.corpus);
    std::vector<std::string> files;
    files.push_back(put(Stage::ingest, "corpus.jsonl", corpus_text.str()));
    files.push_back(put(Stage::ingest, "seeds.csv", seed_text));

    std::map<PostKind, std::size_t> kinds;
    for (const auto& p : loaded.corpus.posts()) ++kinds[p.kind];
    files.push_back(put(Stage::ingest, "summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("metric", "value");
                          w.row("posts", loaded.corpus.size());
                          w.row("skipped_lines", loaded.skipped_count);
                          w.row("users", loaded.corpus.by_author().size());
                          w.row("hashtags", loaded.corpus.by_hashtag().size());
                          for (PostKind k : {PostKind::original, PostKind::retweet, PostKind::reply, PostKind::quote})
                            w.row(std::string(to_string(k)) + "_posts", kinds[k]);
                        })));
    corpus_ = loaded.corpus;
    return files;
  }

  std::vector<std::string> tox() {
    ScorerConfig sc;
    sc.mode = toxicity_mode() == "offline" ? ScorerMode::offline : ScorerMode::remote;
    sc.endpoint = cfg_.endpoint;
    sc.api_key_env = cfg_.api_key_env;
    sc.max_qps = cfg_.max_qps;
    sc.max_retries = cfg_.max_retries;
    sc.batch_concurrency = cfg_.batch_concurrency;
    sc.backoff_seconds = cfg_.backoff_seconds;

    const fs::path cache_dir = cfg_.resolve(cfg_.cache_dir);
    const std::string tag =
        sc.mode == ScorerMode::offline ? "offline_" + OfflineLexicon::bundled_sha256().substr(0, 12) : "remote";
    const fs::path cache_scores = cache_dir / ("toxicity_" + tag + ".csv");
    const fs::path cache_unscored = cache_dir / ("toxicity_" + tag + "_unscored.csv");
    std::optional<ToxicityTable> cache;
    if (fs::exists(cache_scores) && fs::exists(cache_unscored))
      cache = load_toxicity_table(cache_scores, cache_unscored);

    ScoringStats stats;
    auto table = score_posts(corpus(), sc, cache ? &*cache : nullptr, &stats);
    fs::create_directories(cache_dir);
    save_toxicity_table(table, cache_scores, cache_unscored);
    save_toxicity_table(table, at(Stage::tox, "toxicity.csv"), at(Stage::tox, "unscored.csv"));
    log("tox: " + std::to_string(stats.requests) + " requests, " + std::to_string(stats.cached) + " cached");

    std::map<std::string, std::size_t> reasons;
    for (const auto& [_, r] : table.unscored) ++reasons[std::string(to_string(r))];
    std::vector<std::string> files = {std::string("tox/toxicity.csv"), std::string("tox/unscored.csv")};
    files.push_back(put(Stage::tox, "summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("metric", "value");
                          w.row("scored", table.scores.size());
                          for (const auto& [r, n] : reasons) w.row("unscored_" + r, n);
                        })));
    toxicity_ = std::move(table);
    return files;
  }

  std::vector<std::string> coord() {
    const auto seed_cfg = seeds();
    CoordinationSettings settings;
    settings.superspreader_fraction = cfg_.superspreader_fraction;
    settings.backbone_alpha = cfg_.backbone_alpha;
    settings.louvain_seed = cfg_.seed;
    const auto run = detect_coordination(corpus(), settings, seed_cfg.excluded_accounts);

    std::vector<std::string> files;
    write_coordination_result(run.result, at(Stage::coord, "coordination.csv"));
    files.push_back("coord/coordination.csv");
    files.push_back(put(Stage::coord, "superspreaders.csv", csv_text([&](csv::Writer& w) {
                          w.row("user", "retweets");
                          for (const auto& u : run.superspreaders) w.row(u, corpus().retweet_counts().at(u));
                        })));
    write_edge_list(run.similarity, at(Stage::coord, "similarity_edges.csv"));
    write_edge_list(run.backbone, at(Stage::coord, "backbone_edges.csv"));
    write_node_attrs(run.backbone, at(Stage::coord, "backbone_nodes.csv"));
    files.insert(files.end(), {"coord/similarity_edges.csv", "coord/backbone_edges.csv", "coord/backbone_nodes.csv"});
    files.push_back(put(Stage::coord, "excluded.csv", csv_text([&](csv::Writer& w) {
                          w.row("user");
                          for (const auto& u : run.result.excluded) w.row(u);
                        })));
    files.push_back(put(Stage::coord, "summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("metric", "value");
                          w.row("superspreaders", run.superspreaders.size());
                          w.row("similarity_edges", run.similarity.edge_count());
                          w.row("backbone_edges", run.backbone.edge_count());
                          w.row("median_score", run.result.threshold_used);
                          w.row("coordinated", run.result.coordinated.size());
                          w.row("excluded_above_median", run.result.excluded.size());
                        })));
    return files;
  }

  std::vector<std::string> leaning() {
    const auto seed_cfg = seeds();
    const auto net = build_cooccurrence(corpus());
    const auto schedule = alpha_schedule(cfg_.alpha_start, cfg_.alpha_end, cfg_.alpha_steps);
    auto prop = propagate_labels(net, seed_cfg.hashtag_leanings, schedule);
    for (const auto& tag : prop.missing_seeds) log("leaning: seed hashtag " + tag + " does not occur in the corpus");

    LeaningTable table;
    table.hashtag_leaning = prop.leaning;
    table.undefined_hashtags_final = prop.undefined_final;
    std::map<std::string, std::optional<double>> per_post;
    for (const auto& p : corpus().posts()) {
      auto l = post_leaning(p, table.hashtag_leaning);
      per_post.emplace(p.post_id, l);
      if (l) table.post_leaning.emplace(p.post_id, *l);
    }
    table.user_leaning = user_leaning(corpus(), per_post);
    write_leaning_table(table, out_ / "leaning");

    std::vector<std::string> files = {"leaning/hashtag_leaning.csv", "leaning/post_leaning.csv",
                                      "leaning/user_leaning.csv", "leaning/undefined_hashtags.csv"};
    files.push_back(put(Stage::leaning, "summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("metric", "value");
                          w.row("cooccurrence_nodes", net.node_count());
                          w.row("cooccurrence_edges", net.edge_count());
                          w.row("missing_seeds", prop.missing_seeds.size());
                          w.row("undefined_final", prop.undefined_final.size());
                          for (std::size_t i = 0; i < prop.defined_per_step.size(); ++i)
                            w.row("defined_after_step_" + std::to_string(i + 1), prop.defined_per_step[i]);
                        })));
    return files;
  }

  std::vector<std::string> metrics() {
    const auto& tox = toxicity();
    write_user_toxicity(all_user_toxicity(corpus(), tox, cfg_.top_fraction, true),
                        at(Stage::metrics, "user_toxicity.csv"));
    write_user_toxicity(all_user_toxicity(corpus(), tox, cfg_.top_fraction, false),
                        at(Stage::metrics, "user_toxicity_no_retweets.csv"));
    std::vector<std::string> files = {"metrics/user_toxicity.csv", "metrics/user_toxicity_no_retweets.csv"};
    files.push_back(put(Stage::metrics, "activity.csv", csv_text([&](csv::Writer& w) {
                          w.row("user", "originals", "retweets", "replies", "quotes");
                          for (const auto& [user, indices] : corpus().by_author()) {
                            std::size_t c[4] = {0, 0, 0, 0};
                            for (auto idx : indices) ++c[static_cast<int>(corpus().posts()[idx].kind)];
                            w.row(user, c[0], c[1], c[2], c[3]);
                          }
                        })));
    return files;
  }

  // Users per analysis group after the activity filter.
  struct Groups {
    std::map<std::string, double> with_rt, without_rt;  // user toxicity of active users
    std::set<std::string> coordinated;
  };

  Groups groups() {
    Groups g;
    const auto act = activity();
    const auto coordination = read_coordination_result(at(Stage::coord, "coordination.csv"));
    g.coordinated = coordination.coordinated;
    std::map<std::string, std::size_t> counts;
    for (const auto& [user, a] : act) counts.emplace(user, a.original_or_retweet());
    const auto active = filter_min_activity(counts, static_cast<std::size_t>(cfg_.min_activity));
    for (const auto& [user, t] : read_user_toxicity(at(Stage::metrics, "user_toxicity.csv")))
      if (active.count(user)) g.with_rt.emplace(user, t.value);
    for (const auto& [user, t] : read_user_toxicity(at(Stage::metrics, "user_toxicity_no_retweets.csv")))
      if (active.count(user)) g.without_rt.emplace(user, t.value);
    return g;
  }

  static std::pair<std::vector<double>, std::vector<double>> split(const std::map<std::string, double>& values,
                                                                   const std::set<std::string>& coordinated) {
    std::vector<double> c, nc;
    for (const auto& [user, v] : values) (coordinated.count(user) ? c : nc).push_back(v);
    return {c, nc};
  }

  static void write_density(csv::Writer& w, const std::vector<std::string>& keys, const std::vector<double>& dist) {
    auto [lo, hi] = std::minmax_element(dist.begin(), dist.end());
    Range range{*lo, *hi > *lo ? *hi : *lo + 1e-9};
    const std::size_t bins = 100;
    const auto h = histogram(dist, range, bins);
    const double width = (range.high - range.low) / bins;
    for (std::size_t b = 0; b < bins; ++b) {
      for (const auto& k : keys) w.field(k);
      w.field(range.low + width * static_cast<double>(b));
      w.field(range.low + width * static_cast<double>(b + 1));
      w.field(static_cast<double>(h.counts[b]) / (static_cast<double>(dist.size()) * width));
      w.end_row();
    }
  }

  std::vector<std::string> compare() {
    const auto g = groups();
    const auto coordination = read_coordination_result(at(Stage::coord, "coordination.csv"));
    const auto backbone = read_network(at(Stage::coord, "backbone_edges.csv"), at(Stage::coord, "backbone_nodes.csv"));
    const auto lean = read_leaning_table(out_ / "leaning");

    struct StatRow {
      std::string analysis, cluster, group, statistic;
      std::optional<double> value, ci_low, ci_high, p_value;
      std::size_t n = 0;
      std::string note;
    };
    std::vector<StatRow> rows;

    // Coordinated vs non-coordinated user toxicity.
    struct Boot {
      std::string variant, group;
      std::size_t n;
      BootstrapSummary summary;
    };
    std::vector<Boot> boots;
    std::uint64_t slot = kSeedBootstrap;
    for (const auto& [variant, values] :
         std::vector<std::pair<std::string, const std::map<std::string, double>*>>{{"with_retweets", &g.with_rt},
                                                                                   {"without_retweets", &g.without_rt}}) {
      auto [c, nc] = split(*values, g.coordinated);
      for (const auto& [group, sample] :
           std::vector<std::pair<std::string, std::vector<double>*>>{{"coordinated", &c}, {"non_coordinated", &nc}}) {
        const std::uint64_t s = derive_seed(cfg_.seed, slot++);
        if (sample->empty()) {
          rows.push_back({"user_toxicity_mean", "", group, variant, {}, {}, {}, {}, 0, "no users"});
          continue;
        }
        auto summary = bootstrap_mean(*sample, cfg_.bootstrap_replicates, s);
        rows.push_back({"user_toxicity_mean", "", group, variant, summary.mean, summary.ci_low, summary.ci_high, {},
                        sample->size(), ""});
        rows.push_back({"user_toxicity_sd", "", group, variant, sample_sd(*sample), {}, {}, {}, sample->size(), ""});
        boots.push_back({variant, group, sample->size(), std::move(summary)});
      }
      try {
        const auto ad = anderson_darling_k({c, nc}, cfg_.ad_simulations, derive_seed(cfg_.seed, kSeedAnderson));
        rows.push_back({"anderson_darling", "", "coordinated_vs_non_coordinated", variant, ad.statistic, {}, {},
                        ad.p_value, c.size() + nc.size(), ""});
      } catch (const Error& e) {
        rows.push_back({"anderson_darling", "", "coordinated_vs_non_coordinated", variant, {}, {}, {}, {},
                        c.size() + nc.size(), e.what()});
      }
    }

    // Per-cluster analyses on the largest communities.
    std::map<int, std::vector<std::string>> members;
    for (const auto& [user, c] : coordination.communities)
      if (c >= 0 && c < cfg_.clusters) members[c].push_back(user);
    std::map<std::string, int> cluster_of;
    for (const auto& [c, list] : members)
      for (const auto& u : list) cluster_of.emplace(u, c);
    const auto normalized = cluster_normalized_leaning(lean.user_leaning, cluster_of);
    std::map<std::string, double> all_tox;
    for (const auto& [user, t] : read_user_toxicity(at(Stage::metrics, "user_toxicity.csv"))) all_tox.emplace(user, t.value);

    std::string clusters_csv = csv_text([&](csv::Writer& w) {
      w.row("cluster", "size", "coordinated", "mean_leaning");
      for (const auto& [c, list] : members) {
        double sum = 0.0;
        std::size_t n = 0, coord = 0;
        for (const auto& u : list) {
          if (coordination.coordinated.count(u)) ++coord;
          if (auto it = lean.user_leaning.find(u); it != lean.user_leaning.end()) {
            sum += it->second;
            ++n;
          }
        }
        w.row(c, list.size(), coord, n ? csv::format_double(sum / static_cast<double>(n)) : std::string());
      }
    });

    std::uint64_t sp_slot = kSeedSpearman, sh_slot = kSeedShuffle;
    for (const auto& [c, list] : members) {
      const std::string cname = std::to_string(c);
      for (const std::string group : {"coordinated", "non_coordinated"}) {
        std::vector<double> score, tox, nlean, tox_l;
        for (const auto& u : list) {
          if (coordination.coordinated.count(u) != (group == "coordinated")) continue;
          auto t = all_tox.find(u);
          if (t == all_tox.end()) continue;
          score.push_back(coordination.scores.at(u));
          tox.push_back(t->second);
          if (auto l = normalized.find(u); l != normalized.end()) {
            nlean.push_back(l->second);
            tox_l.push_back(t->second);
          }
        }
        auto spearman_row = [&](const std::string& stat, const std::vector<double>& x, const std::vector<double>& y) {
          const std::uint64_t s = derive_seed(cfg_.seed, sp_slot++);
          try {
            const auto r = spearman(x, y, cfg_.spearman_replicates, s);
            rows.push_back({"spearman", cname, group, stat, r.rho, r.ci.low, r.ci.high, {}, x.size(), ""});
          } catch (const Error& e) {
            rows.push_back({"spearman", cname, group, stat, {}, {}, {}, {}, x.size(), e.what()});
          }
        };
        spearman_row("score_vs_toxicity", score, tox);
        spearman_row("toxicity_vs_normalized_leaning", tox_l, nlean);
      }

      std::vector<NodeId> ids;
      for (const auto& u : list)
        if (auto id = backbone.find(u)) ids.push_back(*id);
      const auto sub = backbone.subgraph(ids);
      try {
        const auto z = shuffle_zscore(sub, all_tox, cfg_.shuffles, derive_seed(cfg_.seed, sh_slot++));
        rows.push_back({"assortativity", cname, "all", "toxicity", z.observed, {}, {}, {}, list.size(), ""});
        rows.push_back({"assortativity_null_mean", cname, "all", "toxicity", z.null_mean, {}, {}, {}, list.size(), ""});
        rows.push_back({"assortativity_null_sd", cname, "all", "toxicity", z.null_sd, {}, {}, {}, list.size(), ""});
        rows.push_back({"assortativity_z", cname, "all", "toxicity", z.z, {}, {}, {}, list.size(), ""});
      } catch (const Error& e) {
        rows.push_back({"assortativity", cname, "all", "toxicity", {}, {}, {}, {}, list.size(), e.what()});
      }
    }

    std::vector<std::string> files;
    files.push_back(put(Stage::compare, "clusters.csv", clusters_csv));
    files.push_back(put(Stage::compare, "stats_summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("analysis", "cluster", "group", "statistic", "value", "ci_low", "ci_high", "p_value",
                                "n", "note");
                          for (const auto& r : rows)
                            w.row(r.analysis, r.cluster, r.group, r.statistic, opt(r.value), opt(r.ci_low),
                                  opt(r.ci_high), opt(r.p_value), r.n, r.note);
                        })));
    files.push_back(put(Stage::compare, "bootstrap_user_toxicity.csv", csv_text([&](csv::Writer& w) {
                          w.row("variant", "group", "n", "mean", "ci_low", "ci_high", "replicates", "seed");
                          for (const auto& b : boots)
                            w.row(b.variant, b.group, b.n, b.summary.mean, b.summary.ci_low, b.summary.ci_high,
                                  b.summary.replicates, static_cast<unsigned long long>(b.summary.seed));
                        })));
    files.push_back(put(Stage::compare, "bootstrap_user_toxicity_density.csv", csv_text([&](csv::Writer& w) {
                          w.row("variant", "group", "bin_low", "bin_high", "density");
                          for (const auto& b : boots) write_density(w, {b.variant, b.group}, b.summary.distribution);
                        })));
    return files;
  }

  InteractionContext context(const ToxicityTable& tox, const std::set<std::string>& coordinated,
                             const std::map<std::string, double>* post_leaning) {
    return InteractionContext{&corpus(), &tox, &coordinated, post_leaning};
  }

  std::vector<std::string> sequences() {
    const auto coordination = read_coordination_result(at(Stage::coord, "coordination.csv"));
    const auto lean = read_leaning_table(out_ / "leaning");
    const auto ctx = context(toxicity(), coordination.coordinated, &lean.post_leaning);
    const auto pairs = collect_block_pairs(ctx, cfg_.toxic_threshold);
    write_block_pairs(pairs, at(Stage::sequences, "block_pairs.csv"));

    struct Entry {
      std::string condition, label;
      std::size_t n;
      BootstrapSummary summary;
    };
    std::vector<Entry> entries;
    const std::vector<std::pair<std::string, Condition>> conditions = {{"author_group", Condition::author_group},
                                                                       {"toxicity_class", Condition::toxicity_class},
                                                                       {"leaning_align", Condition::leaning_align}};
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      const auto& [name, cond] = conditions[i];
      std::map<std::string, std::size_t> counts;
      for (const auto& p : pairs)
        for (const auto& label : condition_labels(p, cond, lean.user_leaning)) ++counts[label];
      for (auto& [label, summary] : conditioned_means(pairs, cond, lean.user_leaning, cfg_.sequence_replicates,
                                                      derive_seed(cfg_.seed, kSeedSequences + i)))
        entries.push_back({name, label, counts[label], std::move(summary)});
    }

    std::vector<std::string> files = {"sequences/block_pairs.csv"};
    files.push_back(put(Stage::sequences, "conditioned_means.csv", csv_text([&](csv::Writer& w) {
                          w.row("condition", "label", "n_pairs", "mean", "ci_low", "ci_high", "replicates", "seed");
                          for (const auto& e : entries)
                            w.row(e.condition, e.label, e.n, e.summary.mean, e.summary.ci_low, e.summary.ci_high,
                                  e.summary.replicates, static_cast<unsigned long long>(e.summary.seed));
                        })));
    files.push_back(put(Stage::sequences, "conditioned_means_density.csv", csv_text([&](csv::Writer& w) {
                          w.row("condition", "label", "bin_low", "bin_high", "density");
                          for (const auto& e : entries) write_density(w, {e.condition, e.label}, e.summary.distribution);
                        })));
    files.push_back(put(Stage::sequences, "summary.csv", csv_text([&](csv::Writer& w) {
                          w.row("metric", "value");
                          w.row("block_pairs", pairs.size());
                          std::set<std::string> users;
                          for (const auto& p : pairs) users.insert(p.user);
                          w.row("users_with_pairs", users.size());
                        })));
    return files;
  }

  std::vector<std::string> te() {
    const auto coordination = read_coordination_result(at(Stage::coord, "coordination.csv"));
    const auto ctx = context(toxicity(), coordination.coordinated, nullptr);
    const auto streams = collect_action_streams(ctx);
    std::vector<TimedValue> stamps;
    for (const auto& p : corpus().posts()) stamps.push_back({p.created_at, 0.0});
    const auto [start, end] = hour_window(stamps);

    const auto production = hourly_series(streams.productions, start, end);
    const auto coordinated = hourly_series(streams.coordinated_interactions, start, end);
    const auto interactions = hourly_series(streams.interactions, start, end);
    write_hourly_series(production, at(Stage::te, "hourly_production.csv"));
    write_hourly_series(coordinated, at(Stage::te, "hourly_interaction_coordinated.csv"));
    write_hourly_series(interactions, at(Stage::te, "hourly_interaction_all.csv"));

    auto symbols = [&](const HourlySeries& s) -> std::optional<SymbolSeries> {
      for (const auto& v : s.values)
        if (v) return symbolize(s, cfg_.te_probs);
      return std::nullopt;
    };
    const auto sp = symbols(production), sc = symbols(coordinated), sa = symbols(interactions);
    std::vector<TeRow> rows;
    std::uint64_t slot = kSeedTransfer;
    auto test = [&](const std::string& direction, const std::optional<SymbolSeries>& x,
                    const std::optional<SymbolSeries>& y) {
      TeRow row{direction, cfg_.te_q, cfg_.te_history, std::nullopt};
      const std::uint64_t s = derive_seed(cfg_.seed, slot++);
      if (x && y) {
        try {
          row.test = te_significance(*x, *y, cfg_.te_q, cfg_.te_history, cfg_.te_bootstraps, s);
        } catch (const DegenerateError& e) {
          log("te: " + direction + ": " + e.what());
        }
      }
      rows.push_back(std::move(row));
    };
    test("coordinated_interactions->production", sc, sp);
    test("production->coordinated_interactions", sp, sc);
    test("all_interactions->production", sa, sp);
    test("production->all_interactions", sp, sa);
    write_te_summary(rows, at(Stage::te, "te_summary.csv"));
    return {"te/hourly_production.csv", "te/hourly_interaction_coordinated.csv", "te/hourly_interaction_all.csv",
            "te/te_summary.csv"};
  }

  // ---- report ---------------------------------------------------------------

  std::vector<std::string> report() {
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& contents) {
      files.push_back(put(Stage::report, name, contents));
    };
    auto copy = [&](Stage from, const std::string& name, const std::string& as) { emit(as, read_file(at(from, name))); };

    const auto act = activity();
    const auto super = read_list(at(Stage::coord, "superspreaders.csv"));
    const std::set<std::string> super_set(super.begin(), super.end());
    const auto coordination = read_coordination_result(at(Stage::coord, "coordination.csv"));
    const auto backbone = read_network(at(Stage::coord, "backbone_edges.csv"), at(Stage::coord, "backbone_nodes.csv"));
    const auto lean = read_leaning_table(out_ / "leaning");
    std::map<std::string, double> tox;
    for (const auto& [user, t] : read_user_toxicity(at(Stage::metrics, "user_toxicity.csv"))) tox.emplace(user, t.value);

    // Activity ECDFs.
    std::map<std::string, std::vector<double>> samples;
    for (const auto& [user, a] : act) {
      const std::string group = super_set.count(user) ? "superspreader" : "other";
      samples[group + "|originals"].push_back(static_cast<double>(a.originals));
      samples[group + "|retweets"].push_back(static_cast<double>(a.retweets));
    }
    std::vector<SvgSeries> ecdf_series;
    emit("ecdf_activity.csv", csv_text([&](csv::Writer& w) {
           w.row("group", "metric", "value", "ecdf");
           for (const auto& [key, values] : samples) {
             const auto bar = key.find('|');
             SvgSeries series{key, {}, {}};
             for (const auto& p : ecdf(values)) {
               w.row(key.substr(0, bar), key.substr(bar + 1), p.value, p.fraction);
               series.x.push_back(std::log10(p.value + 1.0));
               series.y.push_back(p.fraction);
             }
             ecdf_series.push_back(std::move(series));
           }
         }));

    // Joint distributions per cluster and group.
    std::map<std::string, int> cluster_of;
    for (const auto& [user, c] : coordination.communities)
      if (c >= 0 && c < cfg_.clusters) cluster_of.emplace(user, c);
    const auto neighbor_tox = neighbor_weighted_mean(backbone, tox);
    const auto neighbor_lean = neighbor_weighted_mean(backbone, lean.user_leaning);
    const auto normalized = cluster_normalized_leaning(lean.user_leaning, cluster_of);
    const auto bins = static_cast<std::size_t>(cfg_.joint_bins);
    auto joint = [&](const std::string& name, const std::map<std::string, double>& xs,
                     const std::map<std::string, double>& ys, Range xr, Range yr) {
      emit(name, csv_text([&](csv::Writer& w) {
             w.row("cluster", "group", "x_bin", "y_bin", "x_low", "x_high", "y_low", "y_high", "count");
             for (int c = 0; c < cfg_.clusters; ++c)
               for (const std::string group : {"coordinated", "non_coordinated"}) {
                 std::vector<double> x, y;
                 for (const auto& [user, uc] : cluster_of) {
                   if (uc != c || coordination.coordinated.count(user) != (group == "coordinated")) continue;
                   auto xi = xs.find(user);
                   auto yi = ys.find(user);
                   if (xi == xs.end() || yi == ys.end()) continue;
                   x.push_back(xi->second);
                   y.push_back(yi->second);
                 }
                 const auto h = histogram2d(x, y, xr, yr, bins);
                 const double xw = (xr.high - xr.low) / static_cast<double>(bins);
                 const double yw = (yr.high - yr.low) / static_cast<double>(bins);
                 for (std::size_t i = 0; i < bins; ++i)
                   for (std::size_t j = 0; j < bins; ++j)
                     w.row(c, group, i, j, xr.low + xw * static_cast<double>(i), xr.low + xw * static_cast<double>(i + 1),
                           yr.low + yw * static_cast<double>(j), yr.low + yw * static_cast<double>(j + 1), h.at(i, j));
               }
           }));
    };
    joint("joint_score_toxicity.csv", coordination.scores, tox, {0, 1}, {0, 1});
    joint("joint_toxicity_neighbor_toxicity.csv", tox, neighbor_tox, {0, 1}, {0, 1});
    joint("joint_leaning_toxicity.csv", normalized, tox, {0, 1}, {0, 1});
    joint("joint_leaning_neighbor_leaning.csv", lean.user_leaning, neighbor_lean, {-1, 1}, {-1, 1});

    // Activity against toxicity, and the user toxicity distributions.
    std::map<std::string, std::size_t> counts;
    for (const auto& [user, a] : act) counts.emplace(user, a.original_or_retweet());
    const auto active = filter_min_activity(counts, static_cast<std::size_t>(cfg_.min_activity));
    std::vector<SvgSeries> loess_series;
    std::string loess_csv = csv_text([&](csv::Writer& w) {
      w.row("group", "log10_activity", "fitted", "ci_low", "ci_high");
      for (const std::string group : {"coordinated", "non_coordinated"}) {
        std::vector<double> x, y;
        for (const auto& [user, t] : tox) {
          if (!active.count(user) || coordination.coordinated.count(user) != (group == "coordinated")) continue;
          x.push_back(std::log10(static_cast<double>(counts.at(user))));
          y.push_back(t);
        }
        std::vector<LoessPoint> fit;
        try {
          fit = loess(x, y, cfg_.loess_span);
        } catch (const Error& e) {
          log("report: no activity smoother for " + group + ": " + e.what());
        }
        SvgSeries series{group, {}, {}};
        for (const auto& p : fit) {
          w.row(group, p.x, p.fitted, p.ci_low, p.ci_high);
          series.x.push_back(p.x);
          series.y.push_back(p.fitted);
        }
        loess_series.push_back(std::move(series));
      }
    });
    emit("activity_toxicity_loess.csv", loess_csv);
    emit("user_toxicity_hist.csv", csv_text([&](csv::Writer& w) {
           w.row("group", "bin_low", "bin_high", "count");
           for (const std::string group : {"coordinated", "non_coordinated"}) {
             std::vector<double> v;
             for (const auto& [user, t] : tox)
               if (active.count(user) && coordination.coordinated.count(user) == (group == "coordinated"))
                 v.push_back(t);
             const auto h = histogram(v, {0, 1}, 50);
             for (std::size_t b = 0; b < 50; ++b) w.row(group, b / 50.0, (b + 1) / 50.0, h.counts[b]);
           }
         }));
    copy(Stage::compare, "bootstrap_user_toxicity.csv", "bootstrap_user_toxicity.csv");
    copy(Stage::compare, "bootstrap_user_toxicity_density.csv", "bootstrap_user_toxicity_density.csv");
    copy(Stage::sequences, "conditioned_means.csv", "bootstrap_conditioned.csv");
    copy(Stage::sequences, "conditioned_means_density.csv", "bootstrap_conditioned_density.csv");

    // Hourly series with smoothers and marginals.
    struct Hourly {
      std::string name;
      std::vector<std::vector<std::string>> rows;
    };
    std::vector<Hourly> hourly;
    for (const auto& [name, file] : std::vector<std::pair<std::string, std::string>>{
             {"production", "hourly_production.csv"},
             {"coordinated_interactions", "hourly_interaction_coordinated.csv"},
             {"all_interactions", "hourly_interaction_all.csv"}})
      hourly.push_back({name, csv::read_file(at(Stage::te, file))});
    emit("hourly_series.csv", csv_text([&](csv::Writer& w) {
           w.row("hour", "production_mean", "production_count", "coordinated_interaction_mean",
                 "coordinated_interaction_count", "all_interaction_mean", "all_interaction_count");
           for (std::size_t i = 1; i < hourly[0].rows.size(); ++i) {
             w.field(hourly[0].rows[i][0]);
             for (const auto& h : hourly) {
               w.field(h.rows[i][1]);
               w.field(h.rows[i][2]);
             }
             w.end_row();
           }
         }));
    std::vector<SvgSeries> hourly_svg;
    emit("hourly_loess.csv", csv_text([&](csv::Writer& w) {
           w.row("series", "hour_index", "fitted", "ci_low", "ci_high");
           for (const auto& h : hourly) {
             std::vector<double> x, y;
             for (std::size_t i = 1; i < h.rows.size(); ++i)
               if (!h.rows[i][1].empty()) {
                 x.push_back(static_cast<double>(i - 1));
                 y.push_back(csv::parse_double(h.rows[i][1]));
               }
             SvgSeries series{h.name, {}, {}};
             try {
               for (const auto& p : loess(x, y, cfg_.loess_span)) {
                 w.row(h.name, p.x, p.fitted, p.ci_low, p.ci_high);
                 series.x.push_back(p.x);
                 series.y.push_back(p.fitted);
               }
             } catch (const Error& e) {
               log("report: no hourly smoother for " + h.name + ": " + e.what());
             }
             hourly_svg.push_back(std::move(series));
           }
         }));
    emit("hourly_marginals.csv", csv_text([&](csv::Writer& w) {
           w.row("series", "bin_low", "bin_high", "count");
           for (const auto& h : hourly) {
             std::vector<double> v;
             for (std::size_t i = 1; i < h.rows.size(); ++i)
               if (!h.rows[i][1].empty()) v.push_back(csv::parse_double(h.rows[i][1]));
             const auto hist = histogram(v, {0, 1}, 50);
             for (std::size_t b = 0; b < 50; ++b) w.row(h.name, b / 50.0, (b + 1) / 50.0, hist.counts[b]);
           }
         }));
    copy(Stage::te, "te_summary.csv", "te_summary.csv");
    copy(Stage::compare, "stats_summary.csv", "stats_summary.csv");
    copy(Stage::compare, "clusters.csv", "clusters.csv");

    if (svg()) {
      emit("ecdf_activity.svg", svg_line_chart("Activity ECDF", "log10(count + 1)", "ECDF", ecdf_series));
      emit("activity_toxicity.svg", svg_line_chart("Activity vs user toxicity", "log10(activity)", "toxicity",
                                                   loess_series));
      emit("hourly_series.svg", svg_line_chart("Hourly toxicity (smoothed)", "hour", "toxicity", hourly_svg));
    }

    // Manifest of every artifact of every stage, report included.
    nlohmann::ordered_json manifest;
    manifest["version"] = kStageVersion;
    manifest["seed"] = cfg_.seed;
    nlohmann::ordered_json artifacts = nlohmann::ordered_json::object();
    for (Stage s : kStages) {
      if (s == Stage::report) continue;
      const auto stamp = nlohmann::json::parse(read_file(stamp_path(s)));
      for (const auto& [rel, hash] : stamp.at("artifacts").items()) artifacts[rel] = hash;
    }
    for (const auto& rel : files) artifacts[rel] = sha256_file(out_ / rel);
    manifest["artifacts"] = artifacts;
    write_file_atomic(out_ / "manifest.json", manifest.dump(2) + "\n");
    return files;
  }

  const PipelineConfig& cfg_;
  RunOptions opts_;
  fs::path out_;
  std::map<Stage, std::string> fingerprints_;
  std::optional<Corpus> corpus_;
  std::optional<ToxicityTable> toxicity_;
};

}  // namespace

StageOutcome run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  Runner runner(config, options);
  OutputLock lock(runner.out());
  return runner.run(stage);
}

std::vector<StageOutcome> run_all(const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  Runner runner(config, options);
  OutputLock lock(runner.out());
  std::vector<StageOutcome> out;
  for (Stage s : kStages) out.push_back(runner.run(s));
  return out;
}

}  // namespace coordnet
