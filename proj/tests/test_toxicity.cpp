#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "coordnet/error.hpp"
#include "coordnet/toxicity.hpp"
#include "coordnet/util.hpp"
#include "support.hpp"

using namespace coordnet;
using namespace coordnet::testing;

TEST(Preprocess, StripsEntities) {
  EXPECT_EQ(preprocess_text("Vote #GE2019 NOW @bob https://x.co \xF0\x9F\x98\x80"), "vote now");
  EXPECT_EQ(preprocess_text("#BackBoris #GetBrexitDone"), "");
}

TEST(Preprocess, RetweetPrefixSurvives) {
  EXPECT_EQ(preprocess_text("RT @UKLabour: For the many!"), "rt for the many!");
}

TEST(Preprocess, EmojiInsideWordsAndSequences) {
  EXPECT_EQ(preprocess_text("great\xF0\x9F\x91\x8D\xF0\x9F\x8F\xBD job"), "great job");
  EXPECT_EQ(preprocess_text("caf\xC3\xA9 ok"), "caf\xC3\xA9 ok");
  EXPECT_TRUE(is_emoji_codepoint(0x1F600));
  EXPECT_FALSE(is_emoji_codepoint('A'));
  EXPECT_FALSE(is_emoji_codepoint(0xE9));
}

TEST(Lexicon, BundledLexiconIsPinned) {
  EXPECT_EQ(OfflineLexicon::bundled_sha256(), "5cde3b11dc43df4089b3b09469ae456d3ac8a1d6fc3bf6b982b11730ef76e807");
  EXPECT_EQ(OfflineLexicon::bundled_sha256(), sha256_file(COORDNET_SOURCE_DIR "/data/toxicity_lexicon.tsv"));
  const auto& lex = OfflineLexicon::bundled();
  EXPECT_EQ(lex.version(), 1);
  EXPECT_EQ(lex.bias(), -2.0);
  EXPECT_EQ(lex.gain(), 4.0);
}

TEST(Lexicon, OfflineOrderingFollowsLexicon) {
  const auto& lex = OfflineLexicon::bundled();
  const double awful = offline_score("you are awful");
  const double nice = offline_score("have a nice day");
  // oracle: logistic(bias + gain * weight / tokens)
  const double w = lex.weights().at("awful");
  EXPECT_NEAR(awful, 1.0 / (1.0 + std::exp(-(lex.bias() + lex.gain() * w / 3.0))), 1e-15);
  EXPECT_NEAR(nice, 1.0 / (1.0 + std::exp(-lex.bias())), 1e-15);
  EXPECT_GT(awful, nice);
}

TEST(Lexicon, NeutralTokenScoresLow) {
  EXPECT_LT(offline_score("hello"), 0.3);
  EXPECT_NEAR(offline_score("hello"), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
}

TEST(Lexicon, HighestWeightTermIsMaximalSingleToken) {
  const auto& lex = OfflineLexicon::bundled();
  std::string top;
  double best = 0.0;
  for (const auto& [term, w] : lex.weights())
    if (w > best) best = w, top = term;
  const double s = offline_score(top);
  EXPECT_NEAR(s, 1.0 / (1.0 + std::exp(-(lex.bias() + lex.gain() * best))), 1e-15);
  for (const auto& [term, w] : lex.weights()) EXPECT_LE(offline_score(term), s);
  EXPECT_LE(offline_score("zzz"), s);
  EXPECT_EQ(offline_score(top), offline_score(top));
}

TEST(Lexicon, HitScoreIsMonotoneUnderAppending) {
  const auto& lex = OfflineLexicon::bundled();
  std::mt19937_64 rng(5);
  std::vector<std::string> terms;
  for (const auto& [t, _] : lex.weights()) terms.push_back(t);
  const std::vector<std::string> filler = {"the", "vote", "nhs", "plan", "people"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int i = 0; i < 6; ++i)
      text += (rng() % 3 ? filler[rng() % filler.size()] : terms[rng() % terms.size()]) + " ";
    const double before = lex.hit_score(text);
    const double after = lex.hit_score(text + terms[rng() % terms.size()]);
    ASSERT_GE(after, before);
  }
}

TEST(Lexicon, ParseRejectsBadInput) {
  EXPECT_THROW(OfflineLexicon::parse("@bias\t0\nfoo\t0.5\n"), ParseError);
  EXPECT_THROW(OfflineLexicon::parse("@bias\t0\n@gain\t1\nfoo\t1.5\n"), ParseError);
  EXPECT_THROW(OfflineLexicon::parse("@bias\t0\n@gain\t1\nfoo 0.5\n"), ParseError);
  const auto lex = OfflineLexicon::parse("@bias\t0\n@gain\t2\nbad\t0.5\n");
  EXPECT_NEAR(lex.score("bad good"), 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
}

namespace {

class CountingBackend : public ToxicityBackend {
 public:
  ScoreOutcome score(const std::string& text) override {
    ++calls;
    return {ScoreOutcome::Status::ok, offline_score(text), {}};
  }
  std::atomic<int> calls{0};
};

Corpus three_posts() {
  return Corpus({original("a", "u1", 0, "you are awful"), original("b", "u2", 1, "have a nice day"),
                 original("c", "u3", 2, "vote now")});
}

ScorerConfig remote_config() {
  ScorerConfig c;
  c.mode = ScorerMode::remote;
  c.max_qps = 10.0;
  return c;
}

}  // namespace

TEST(Scoring, CachedPostsAreNotRequested) {
  const auto corpus = three_posts();
  ToxicityTable cache;
  cache.scores = {{"a", 0.5}, {"b", 0.1}};
  CountingBackend backend;
  SimulatedClock clock;
  ScoringStats stats;
  const auto table = score_posts(corpus, remote_config(), &cache, backend, clock, &stats);
  EXPECT_EQ(backend.calls, 1);
  EXPECT_EQ(stats.requests, 1u);
  EXPECT_EQ(stats.cached, 2u);
  EXPECT_EQ(table.scores.size(), 3u);
  EXPECT_EQ(table.scores.at("a"), 0.5);
}

TEST(Scoring, RescoringWithProducedCacheIssuesNothing) {
  const auto corpus = Corpus({original("a", "u1", 0, "awful"), original("b", "u2", 1, "#GE2019"),
                              original("c", "u3", 2, "fine")});
  CountingBackend backend;
  SimulatedClock clock;
  const auto first = score_posts(corpus, remote_config(), nullptr, backend, clock);
  EXPECT_EQ(backend.calls, 2);
  EXPECT_EQ(first.unscored.at("b"), UnscoredReason::empty_after_preprocessing);
  const auto second = score_posts(corpus, remote_config(), &first, backend, clock);
  EXPECT_EQ(backend.calls, 2);
  EXPECT_EQ(second.scores, first.scores);
  EXPECT_EQ(second.unscored, first.unscored);
}

TEST(Scoring, ServiceErrorsAreRetriedWithBackoffThenRecorded) {
  class Flaky : public ToxicityBackend {
   public:
    explicit Flaky(Clock& c) : clock(c) {}
    ScoreOutcome score(const std::string&) override {
      times.push_back(clock.now());
      return {ScoreOutcome::Status::retryable_error, 0.0, "HTTP 503"};
    }
    Clock& clock;
    std::vector<double> times;
  };
  const Corpus corpus({original("a", "u1", 0, "hello there")});
  SimulatedClock clock;
  Flaky backend(clock);
  auto config = remote_config();
  config.max_qps = 1000.0;
  config.max_retries = 3;
  config.backoff_seconds = 1.0;
  ScoringStats stats;
  const auto table = score_posts(corpus, config, nullptr, backend, clock, &stats);
  ASSERT_EQ(backend.times.size(), 4u);
  EXPECT_EQ(stats.retries, 3u);
  EXPECT_NEAR(backend.times[1] - backend.times[0], 1.0, 1e-9);
  EXPECT_NEAR(backend.times[2] - backend.times[1], 2.0, 1e-9);
  EXPECT_NEAR(backend.times[3] - backend.times[2], 4.0, 1e-9);
  EXPECT_EQ(table.unscored.at("a"), UnscoredReason::service_error);
  EXPECT_FALSE(table.settled("a"));

  CountingBackend healthy;
  const auto retry = score_posts(corpus, config, &table, healthy, clock);
  EXPECT_EQ(healthy.calls, 1);
  EXPECT_TRUE(retry.scores.count("a"));
  EXPECT_FALSE(retry.unscored.count("a"));
}

TEST(RateLimit, SlidingWindowBoundOnSimulatedClock) {
  for (double qps : {1.0, 2.5, 7.0}) {
    class Recorder : public ToxicityBackend {
     public:
      explicit Recorder(Clock& c) : clock(c) {}
      ScoreOutcome score(const std::string&) override {
        times.push_back(clock.now());
        return {ScoreOutcome::Status::ok, 0.1, {}};
      }
      Clock& clock;
      std::vector<double> times;
    };
    std::vector<PostRecord> posts;
    for (int i = 0; i < 60; ++i) posts.push_back(original("p" + std::to_string(i), "u", i, "word " + std::to_string(i)));
    SimulatedClock clock;
    Recorder backend(clock);
    auto config = remote_config();
    config.max_qps = qps;
    score_posts(Corpus(posts), config, nullptr, backend, clock);
    ASSERT_EQ(backend.times.size(), 60u);
    const auto bound = static_cast<std::size_t>(std::ceil(qps));
    for (std::size_t i = 0; i < backend.times.size(); ++i) {
      std::size_t in_window = 0;
      for (double t : backend.times) in_window += t >= backend.times[i] && t < backend.times[i] + 1.0;
      ASSERT_LE(in_window, bound) << "qps " << qps;
    }
  }
}

TEST(RateLimit, ConcurrentSlotsRespectBound) {
  SimulatedClock clock;
  RateLimiter limiter(3.0, clock);
  std::mutex mu;
  std::vector<double> slots;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) {
        const double s = limiter.acquire();
        std::lock_guard lock(mu);
        slots.push_back(s);
      }
    });
  for (auto& t : threads) t.join();
  std::sort(slots.begin(), slots.end());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    std::size_t n = 0;
    for (double s : slots) n += s >= slots[i] && s < slots[i] + 1.0;
    ASSERT_LE(n, 3u);
  }
}

TEST(Cache, RoundTripAndCorruptionDetection) {
  TempDir dir;
  ToxicityTable t;
  t.scores = {{"a", 0.25}, {"b", 1.0 / 3.0}};
  t.unscored = {{"c", UnscoredReason::unsupported_language}, {"d", UnscoredReason::service_error}};
  save_toxicity_table(t, dir / "s.csv", dir / "u.csv");
  const auto back = load_toxicity_table(dir / "s.csv", dir / "u.csv");
  EXPECT_EQ(back.scores, t.scores);
  EXPECT_EQ(back.unscored, t.unscored);

  write_file_atomic(dir / "bad.csv", "post_id,toxicity\na,1.5\n");
  EXPECT_THROW(load_toxicity_table(dir / "bad.csv", dir / "u.csv"), ParseError);
  write_file_atomic(dir / "bad.csv", "id,score\na,0.5\n");
  EXPECT_THROW(load_toxicity_table(dir / "bad.csv", dir / "u.csv"), ParseError);
  write_file_atomic(dir / "bad.csv", "post_id,toxicity\nc,0.5\n");
  EXPECT_THROW(load_toxicity_table(dir / "bad.csv", dir / "u.csv"), ParseError);
}

TEST(Remote, InterpretsResponses) {
  using S = ScoreOutcome::Status;
  const auto ok = RemoteBackend::interpret_response(
      200, R"({"attributeScores":{"TOXICITY":{"summaryScore":{"value":0.42,"type":"PROBABILITY"}}}})");
  EXPECT_EQ(ok.status, S::ok);
  EXPECT_EQ(ok.value, 0.42);
  EXPECT_EQ(RemoteBackend::interpret_response(400, R"({"error":{"details":[{"errorType":"LANGUAGE_NOT_SUPPORTED_BY_ATTRIBUTE"}]}})").status,
            S::unsupported_language);
  EXPECT_EQ(RemoteBackend::interpret_response(429, "").status, S::retryable_error);
  EXPECT_EQ(RemoteBackend::interpret_response(503, "").status, S::retryable_error);
  EXPECT_EQ(RemoteBackend::interpret_response(403, "").status, S::fatal_error);
  EXPECT_EQ(RemoteBackend::interpret_response(200, "{}").status, S::fatal_error);
  const auto body = nlohmann::json::parse(RemoteBackend::request_body("hi"));
  EXPECT_EQ(body["comment"]["text"], "hi");
  EXPECT_TRUE(body["requestedAttributes"].contains("TOXICITY"));
}

TEST(Remote, FakeServiceEndToEnd) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::mutex mu;
  std::vector<std::string> keys;
  server.Post("/v1alpha1/comments:analyze", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = hits++;
    {
      std::lock_guard lock(mu);
      keys.push_back(req.get_param_value("key"));
    }
    const auto text = nlohmann::json::parse(req.body)["comment"]["text"].get<std::string>();
    if (n == 0) {
      res.status = 503;
      return;
    }
    if (text.find("bonjour") != std::string::npos) {
      res.status = 400;
      res.set_content(R"({"error":{"details":[{"errorType":"LANGUAGE_NOT_SUPPORTED_BY_ATTRIBUTE"}]}})",
                      "application/json");
      return;
    }
    nlohmann::json j;
    j["attributeScores"]["TOXICITY"]["summaryScore"]["value"] = text.size() / 100.0;
    res.set_content(j.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const Corpus corpus({original("a", "u1", 0, "hello world"), original("b", "u2", 1, "bonjour tout le monde"),
                       original("c", "u3", 2, "#GE2019")});
  RemoteBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1alpha1/comments:analyze", "secret", 5.0);
  SimulatedClock clock;
  auto config = remote_config();
  config.max_retries = 2;
  ScoringStats stats;
  const auto table = score_posts(corpus, config, nullptr, backend, clock, &stats);
  server.stop();
  thread.join();

  EXPECT_EQ(hits, 3);
  EXPECT_EQ(stats.retries, 1u);
  EXPECT_DOUBLE_EQ(table.scores.at("a"), 0.11);
  EXPECT_EQ(table.unscored.at("b"), UnscoredReason::unsupported_language);
  EXPECT_EQ(table.unscored.at("c"), UnscoredReason::empty_after_preprocessing);
  for (const auto& k : keys) EXPECT_EQ(k, "secret");
}

TEST(Remote, MissingApiKeyIsAnError) {
  ScorerConfig config;
  config.mode = ScorerMode::remote;
  config.api_key_env = "COORDNET_TEST_UNSET_KEY_VARIABLE";
  EXPECT_THROW(score_posts(three_posts(), config, nullptr), Error);
}

TEST(Scoring, OfflineModeIsDeterministic) {
  ScorerConfig config;
  config.mode = ScorerMode::offline;
  const auto a = score_posts(three_posts(), config, nullptr);
  const auto b = score_posts(three_posts(), config, nullptr);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_GT(a.scores.at("a"), a.scores.at("b"));
}
