#include "coordnet/toxicity.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/lexicon_data.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

namespace {

struct CodepointRange {
  char32_t lo, hi;
};

// Extended_Pictographic plus emoji components (ZWJ, variation selectors,
// keycap, regional indicators, skin-tone modifiers, tag characters).
constexpr CodepointRange kEmojiRanges[] = {
    {0x00A9, 0x00A9},   {0x00AE, 0x00AE},   {0x200D, 0x200D},   {0x203C, 0x203C},
    {0x2049, 0x2049},   {0x20E3, 0x20E3},   {0x2122, 0x2122},   {0x2139, 0x2139},
    {0x2194, 0x2199},   {0x21A9, 0x21AA},   {0x231A, 0x231B},   {0x2328, 0x2328},
    {0x2388, 0x2388},   {0x23CF, 0x23CF},   {0x23E9, 0x23F3},   {0x23F8, 0x23FA},
    {0x24C2, 0x24C2},   {0x25AA, 0x25AB},   {0x25B6, 0x25B6},   {0x25C0, 0x25C0},
    {0x25FB, 0x25FE},   {0x2600, 0x2605},   {0x2607, 0x2612},   {0x2614, 0x2685},
    {0x2690, 0x2705},   {0x2708, 0x2712},   {0x2714, 0x2714},   {0x2716, 0x2716},
    {0x271D, 0x271D},   {0x2721, 0x2721},   {0x2728, 0x2728},   {0x2733, 0x2734},
    {0x2744, 0x2744},   {0x2747, 0x2747},   {0x274C, 0x274C},   {0x274E, 0x274E},
    {0x2753, 0x2755},   {0x2757, 0x2757},   {0x2763, 0x2767},   {0x2795, 0x2797},
    {0x27A1, 0x27A1},   {0x27B0, 0x27B0},   {0x27BF, 0x27BF},   {0x2934, 0x2935},
    {0x2B05, 0x2B07},   {0x2B1B, 0x2B1C},   {0x2B50, 0x2B50},   {0x2B55, 0x2B55},
    {0x3030, 0x3030},   {0x303D, 0x303D},   {0x3297, 0x3297},   {0x3299, 0x3299},
    {0xFE0E, 0xFE0F},   {0x1F000, 0x1F0FF}, {0x1F10D, 0x1F10F}, {0x1F12F, 0x1F12F},
    {0x1F16C, 0x1F171}, {0x1F17E, 0x1F17F}, {0x1F18E, 0x1F18E}, {0x1F191, 0x1F19A},
    {0x1F1AD, 0x1F1FF}, {0x1F201, 0x1F20F}, {0x1F21A, 0x1F21A}, {0x1F22F, 0x1F22F},
    {0x1F232, 0x1F23A}, {0x1F23C, 0x1F23F}, {0x1F249, 0x1F3FF}, {0x1F400, 0x1F53D},
    {0x1F546, 0x1F64F}, {0x1F680, 0x1F6FF}, {0x1F774, 0x1F77F}, {0x1F7D5, 0x1F7FF},
    {0x1F80C, 0x1F80F}, {0x1F848, 0x1F84F}, {0x1F85A, 0x1F85F}, {0x1F888, 0x1F88F},
    {0x1F8AE, 0x1F8FF}, {0x1F90C, 0x1F93A}, {0x1F93C, 0x1F945}, {0x1F947, 0x1FAFF},
    {0x1FC00, 0x1FFFD}, {0xE0020, 0xE007F},
};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_'; }

// Decodes one UTF-8 sequence starting at s[i]; returns its length (>= 1).
// Malformed bytes decode as themselves with length 1.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    cp = b0;
    return 1;
  }
  if (i + len > s.size()) {
    cp = b0;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      cp = b0;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  return len;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  return true;
}

std::size_t find_url_start(std::string_view token) {
  if (starts_with_icase(token, "t.co/")) return 0;
  std::string lowered(token);
  for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto a = lowered.find("http://");
  const auto b = lowered.find("https://");
  return std::min(a, b);
}

// Strips entities from one whitespace-delimited token. Returns the kept text
// (possibly empty) and whether anything was removed.
std::string strip_token(std::string_view token, bool& removed) {
  removed = false;
  const std::size_t url = find_url_start(token);
  if (url != std::string_view::npos) {
    token = token.substr(0, url);
    removed = true;
  }
  std::string out;
  std::size_t i = 0;
  while (i < token.size()) {
    const char c = token[i];
    if (c == '#' && i + 1 < token.size() && is_word_byte(static_cast<unsigned char>(token[i + 1]))) {
      std::size_t j = i + 1;
      while (j < token.size() && is_word_byte(static_cast<unsigned char>(token[j]))) ++j;
      i = j;
      removed = true;
      continue;
    }
    const bool mention_boundary = out.empty() || !is_word_byte(static_cast<unsigned char>(out.back()));
    if (c == '@' && mention_boundary && i + 1 < token.size() &&
        is_word_byte(static_cast<unsigned char>(token[i + 1]))) {
      std::size_t j = i + 1;
      while (j < token.size() && is_word_byte(static_cast<unsigned char>(token[j]))) ++j;
      i = j;
      removed = true;
      continue;
    }
    char32_t cp = 0;
    const std::size_t len = decode_utf8(token, i, cp);
    if (len > 1 && is_emoji_codepoint(cp)) {
      removed = true;
    } else if (len == 1) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      out.append(token.substr(i, len));
    }
    i += len;
  }
  return out;
}

bool has_alnum(std::string_view s) {
  for (unsigned char c : s)
    if (std::isalnum(c) || c >= 0x80) return true;
  return false;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// Lexicon lookup key: token with leading/trailing ASCII punctuation removed.
std::string_view lexicon_key(std::string_view token) {
  while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
  while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
  return token;
}

}  // namespace

bool is_emoji_codepoint(char32_t cp) {
  if (cp < 0x80) return false;
  const auto* end = std::end(kEmojiRanges);
  const auto* it = std::upper_bound(std::begin(kEmojiRanges), end, cp,
                                    [](char32_t v, const CodepointRange& r) { return v < r.lo; });
  if (it == std::begin(kEmojiRanges)) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

std::string preprocess_text(std::string_view text) {
  std::string out;
  for (std::string_view token : split_ws(text)) {
    bool removed = false;
    std::string kept = strip_token(token, removed);
    if (kept.empty() || (removed && !has_alnum(kept))) continue;
    if (!out.empty()) out.push_back(' ');
    out += kept;
  }
  return out;
}

// ---------------------------------------------------------------------------

OfflineLexicon OfflineLexicon::parse(std::string_view tsv) {
  OfflineLexicon lex;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  bool have_bias = false, have_gain = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("lexicon line lacks a tab", line_no);
    const std::string key = line.substr(0, tab);
    const double value = csv::parse_double(std::string_view(line).substr(tab + 1));
    if (key == "@bias") {
      lex.bias_ = value;
      have_bias = true;
    } else if (key == "@gain") {
      lex.gain_ = value;
      have_gain = true;
    } else if (key == "@version") {
      lex.version_ = static_cast<int>(value);
    } else if (!key.empty() && key.front() == '@') {
      throw ParseError("unknown lexicon directive " + key, line_no);
    } else {
      if (!(value > 0.0 && value <= 1.0)) throw ParseError("lexicon weight outside (0,1]", line_no);
      if (!lex.weights_.emplace(key, value).second) throw ParseError("duplicate lexicon term " + key, line_no);
    }
  }
  if (!have_bias || !have_gain) throw ParseError("lexicon lacks @bias or @gain");
  return lex;
}

const OfflineLexicon& OfflineLexicon::bundled() {
  static const OfflineLexicon lex = parse(detail::kBundledLexicon);
  return lex;
}

std::string OfflineLexicon::bundled_sha256() { return sha256_hex(detail::kBundledLexicon); }

double OfflineLexicon::hit_score(std::string_view text) const {
  double hits = 0.0;
  for (auto token : split_ws(text)) {
    auto it = weights_.find(std::string(lexicon_key(token)));
    if (it != weights_.end()) hits += it->second;
  }
  return hits;
}

double OfflineLexicon::score(std::string_view text) const {
  std::size_t tokens = 0;
  double hits = 0.0;
  for (auto token : split_ws(text)) {
    ++tokens;
    auto it = weights_.find(std::string(lexicon_key(token)));
    if (it != weights_.end()) hits += it->second;
  }
  const double z = bias_ + gain_ * hits / static_cast<double>(std::max<std::size_t>(1, tokens));
  return 1.0 / (1.0 + std::exp(-z));
}

double offline_score(std::string_view text) { return OfflineLexicon::bundled().score(text); }

// ---------------------------------------------------------------------------

std::string_view to_string(UnscoredReason reason) {
  switch (reason) {
    case UnscoredReason::empty_after_preprocessing: return "empty_after_preprocessing";
    case UnscoredReason::unsupported_language: return "unsupported_language";
    case UnscoredReason::service_error: return "service_error";
  }
  return "service_error";
}

UnscoredReason parse_unscored_reason(std::string_view text) {
  if (text == "empty_after_preprocessing") return UnscoredReason::empty_after_preprocessing;
  if (text == "unsupported_language") return UnscoredReason::unsupported_language;
  if (text == "service_error") return UnscoredReason::service_error;
  throw ParseError("unknown unscored reason '" + std::string(text) + "'");
}

bool ToxicityTable::settled(const std::string& post_id) const {
  if (scores.count(post_id)) return true;
  auto it = unscored.find(post_id);
  return it != unscored.end() && it->second != UnscoredReason::service_error;
}

void save_toxicity_table(const ToxicityTable& table, const std::filesystem::path& scores_path,
                         const std::filesystem::path& unscored_path) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("post_id", "toxicity");
  for (const auto& [id, v] : table.scores) w.row(id, v);
  std::ostringstream u;
  csv::Writer wu(u);
  wu.row("post_id", "reason");
  for (const auto& [id, r] : table.unscored) wu.row(id, to_string(r));
  write_file_atomic(scores_path, s.str());
  write_file_atomic(unscored_path, u.str());
}

ToxicityTable load_toxicity_table(const std::filesystem::path& scores_path,
                                  const std::filesystem::path& unscored_path) {
  ToxicityTable t;
  auto rows = csv::read_file(scores_path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"post_id", "toxicity"})
    throw ParseError("corrupt toxicity cache header in " + scores_path.string());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw ParseError("corrupt toxicity cache row", i + 1);
    const double v = csv::parse_double(rows[i][1]);
    if (!(v >= 0.0 && v <= 1.0)) throw ParseError("cached toxicity outside [0,1]", i + 1);
    if (!t.scores.emplace(rows[i][0], v).second) throw ParseError("duplicate cached post " + rows[i][0], i + 1);
  }
  if (std::filesystem::exists(unscored_path)) {
    auto urows = csv::read_file(unscored_path);
    if (urows.empty() || urows[0] != std::vector<std::string>{"post_id", "reason"})
      throw ParseError("corrupt unscored cache header in " + unscored_path.string());
    for (std::size_t i = 1; i < urows.size(); ++i) {
      if (urows[i].size() != 2) throw ParseError("corrupt unscored cache row", i + 1);
      if (t.scores.count(urows[i][0])) throw ParseError("post both scored and unscored: " + urows[i][0], i + 1);
      if (!t.unscored.emplace(urows[i][0], parse_unscored_reason(urows[i][1])).second)
        throw ParseError("duplicate unscored post " + urows[i][0], i + 1);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

void ScorerConfig::validate() const {
  if (!(max_qps > 0.0)) throw DomainError("max_qps must be positive");
  if (batch_concurrency < 1) throw DomainError("batch_concurrency must be >= 1");
  if (max_retries < 0) throw DomainError("max_retries must be >= 0");
  if (backoff_seconds < 0.0) throw DomainError("backoff_seconds must be >= 0");
}

double SteadyClock::now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void SteadyClock::sleep_until(double t) {
  const double dt = t - now();
  if (dt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
}

double SimulatedClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void SimulatedClock::sleep_until(double t) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, t);
}

RateLimiter::RateLimiter(double max_qps, Clock& clock)
    : clock_(clock), interval_(1.0 / max_qps), next_free_(0.0) {
  if (!(max_qps > 0.0)) throw DomainError("max_qps must be positive");
  burst_ = static_cast<std::size_t>(std::ceil(max_qps));
}

double RateLimiter::acquire() {
  double slot = 0.0;
  {
    std::lock_guard lock(mu_);
    const double now = clock_.now();
    slot = started_ ? std::max(now, next_free_) : now;
    if (recent_.size() == burst_) {
      slot = std::max(slot, recent_.front() + 1.0);
      recent_.pop_front();
    }
    recent_.push_back(slot);
    started_ = true;
    next_free_ = slot + interval_;
  }
  clock_.sleep_until(slot);
  return slot;
}

ScoreOutcome OfflineBackend::score(const std::string& preprocessed_text) {
  return ScoreOutcome{ScoreOutcome::Status::ok, offline_score(preprocessed_text), {}};
}

RemoteBackend::RemoteBackend(std::string endpoint, std::string api_key, double timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw DomainError("endpoint lacks a scheme: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

std::string RemoteBackend::request_body(std::string_view text) {
  nlohmann::ordered_json j;
  j["comment"]["text"] = std::string(text);
  j["requestedAttributes"]["TOXICITY"] = nlohmann::json::object();
  return j.dump();
}

ScoreOutcome RemoteBackend::interpret_response(int http_status, std::string_view body) {
  using Status = ScoreOutcome::Status;
  if (http_status == 200) {
    try {
      auto j = nlohmann::json::parse(body);
      const double v = j.at("attributeScores").at("TOXICITY").at("summaryScore").at("value").get<double>();
      if (!(v >= 0.0 && v <= 1.0)) return {Status::fatal_error, 0.0, "score outside [0,1]"};
      return {Status::ok, v, {}};
    } catch (const nlohmann::json::exception& e) {
      return {Status::fatal_error, 0.0, std::string("malformed response: ") + e.what()};
    }
  }
  if (http_status == 400 && body.find("LANGUAGE_NOT_SUPPORTED") != std::string_view::npos)
    return {Status::unsupported_language, 0.0, "language not supported"};
  if (http_status == 429 || http_status >= 500 || http_status <= 0)
    return {Status::retryable_error, 0.0, "HTTP " + std::to_string(http_status)};
  return {Status::fatal_error, 0.0, "HTTP " + std::to_string(http_status)};
}

ScoreOutcome RemoteBackend::score(const std::string& preprocessed_text) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  const std::string path = path_ + (path_.find('?') == std::string::npos ? "?" : "&") + "key=" + api_key_;
  auto res = client.Post(path, request_body(preprocessed_text), "application/json");
  if (!res) return {ScoreOutcome::Status::retryable_error, 0.0, httplib::to_string(res.error())};
  return interpret_response(res->status, res->body);
}

// ---------------------------------------------------------------------------

ToxicityTable score_posts(const Corpus& corpus, const ScorerConfig& config, const ToxicityTable* cache,
                          ToxicityBackend& backend, Clock& clock, ScoringStats* stats) {
  config.validate();
  ToxicityTable table;
  if (cache) table = *cache;

  struct Job {
    const PostRecord* post;
    std::string text;
  };
  std::vector<Job> jobs;
  std::size_t cached = 0;
  for (const auto& post : corpus.posts()) {
    if (table.settled(post.post_id)) {
      ++cached;
      continue;
    }
    table.unscored.erase(post.post_id);
    std::string text = preprocess_text(post.text);
    if (text.empty()) {
      table.unscored[post.post_id] = UnscoredReason::empty_after_preprocessing;
      continue;
    }
    jobs.push_back({&post, std::move(text)});
  }

  std::vector<ScoreOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0}, requests{0}, retries{0};
  std::unique_ptr<RateLimiter> limiter;
  if (config.mode == ScorerMode::remote) limiter = std::make_unique<RateLimiter>(config.max_qps, clock);

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      ScoreOutcome out;
      for (int attempt = 0;; ++attempt) {
        if (limiter) limiter->acquire();
        ++requests;
        out = backend.score(jobs[i].text);
        if (out.status != ScoreOutcome::Status::retryable_error || attempt >= config.max_retries) break;
        ++retries;
        clock.sleep_for(config.backoff_seconds * std::ldexp(1.0, attempt));
      }
      outcomes[i] = std::move(out);
    }
  };
  const int threads = std::max(1, std::min<int>(config.batch_concurrency, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& id = jobs[i].post->post_id;
    switch (outcomes[i].status) {
      case ScoreOutcome::Status::ok: table.scores[id] = outcomes[i].value; break;
      case ScoreOutcome::Status::unsupported_language:
        table.unscored[id] = UnscoredReason::unsupported_language;
        break;
      default: table.unscored[id] = UnscoredReason::service_error; break;
    }
  }
  if (stats) *stats = ScoringStats{requests.load(), retries.load(), cached};
  return table;
}

ToxicityTable score_posts(const Corpus& corpus, const ScorerConfig& config, const ToxicityTable* cache,
                          ScoringStats* stats) {
  SteadyClock clock;
  if (config.mode == ScorerMode::offline) {
    OfflineBackend backend;
    return score_posts(corpus, config, cache, backend, clock, stats);
  }
  const char* key = std::getenv(config.api_key_env.c_str());
  if (!key || !*key) throw Error("API key variable " + config.api_key_env + " is not set");
  RemoteBackend backend(config.endpoint, key);
  return score_posts(corpus, config, cache, backend, clock, stats);
}

}  // namespace coordnet
