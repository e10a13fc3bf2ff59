#include "coordnet/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"

namespace coordnet {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

int parse_digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) throw ParseError("truncated timestamp '" + std::string(s) + "'");
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i])))
      throw ParseError("bad timestamp '" + std::string(s) + "'");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect_char(std::string_view s, std::size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c) throw ParseError("bad timestamp '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void validate_references(const PostRecord& p) {
  if (p.kind == PostKind::original) {
    if (p.referenced_post_id || p.referenced_author_id)
      throw ParseError("original post " + p.post_id + " carries reference fields");
  } else if (!p.referenced_post_id) {
    throw ParseError(std::string(to_string(p.kind)) + " " + p.post_id + " lacks referenced_post_id");
  }
}

}  // namespace

std::string_view to_string(PostKind kind) {
  switch (kind) {
    case PostKind::original: return "original";
    case PostKind::retweet: return "retweet";
    case PostKind::reply: return "reply";
    case PostKind::quote: return "quote";
  }
  return "original";
}

PostKind parse_post_kind(std::string_view text) {
  if (text == "original") return PostKind::original;
  if (text == "retweet") return PostKind::retweet;
  if (text == "reply") return PostKind::reply;
  if (text == "quote") return PostKind::quote;
  throw ParseError("unknown post kind '" + std::string(text) + "'");
}

Timestamp parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  const int y = parse_digits(s, 0, 4);
  expect_char(s, 4, '-');
  const int mo = parse_digits(s, 5, 2);
  expect_char(s, 7, '-');
  const int d = parse_digits(s, 8, 2);
  if (s.size() <= 10 || (s[10] != 'T' && s[10] != ' '))
    throw ParseError("bad timestamp '" + std::string(s) + "'");
  const int hh = parse_digits(s, 11, 2);
  expect_char(s, 13, ':');
  const int mm = parse_digits(s, 14, 2);
  expect_char(s, 16, ':');
  const int ss = parse_digits(s, 17, 2);
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) throw ParseError("bad fractional seconds in '" + std::string(s) + "'");
  }
  int offset_minutes = 0;
  if (pos < s.size() && s[pos] == 'Z') {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '+' ? 1 : -1;
    const int oh = parse_digits(s, pos + 1, 2);
    expect_char(s, pos + 3, ':');
    const int om = parse_digits(s, pos + 4, 2);
    if (oh > 23 || om > 59) throw ParseError("bad UTC offset in '" + std::string(s) + "'");
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  } else {
    throw ParseError("timestamp lacks a UTC designator: '" + std::string(s) + "'");
  }
  if (pos != s.size()) throw ParseError("trailing characters in timestamp '" + std::string(s) + "'");
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
    throw ParseError("invalid calendar instant '" + std::string(s) + "'");
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{ts - day_point};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::vector<std::string> extract_hashtags(std::string_view text) {
  std::vector<std::string> tags;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '#') continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i + 1) continue;
    std::string tag = lower(text.substr(i, j - i));
    if (seen.insert(tag).second) tags.push_back(std::move(tag));
    i = j - 1;
  }
  return tags;
}

std::string normalize_hashtag(std::string_view tag) {
  std::string t = trim(tag);
  if (!t.empty() && t.front() == '#') t.erase(0, 1);
  if (t.empty()) throw DomainError("empty hashtag");
  for (unsigned char c : t)
    if (!is_word_char(c)) throw DomainError("invalid hashtag '" + std::string(tag) + "'");
  return "#" + lower(t);
}

// ---------------------------------------------------------------------------
// Seed configuration

SeedConfig parse_seed_config(std::istream& in) {
  enum class Section { none, hashtags, accounts, excluded };
  SeedConfig cfg;
  Section section = Section::none;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = csv::split_line(stripped);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    for (auto& f : fields) f = trim(f);
    const std::string head = lower(fields[0]);
    if (fields.size() == 2 && head == "hashtag" && lower(fields[1]) == "leaning") {
      section = Section::hashtags;
      continue;
    }
    if (fields.size() == 2 && head == "account" && lower(fields[1]) == "leaning") {
      section = Section::accounts;
      continue;
    }
    if (fields.size() == 1 && head == "excluded_account") {
      section = Section::excluded;
      continue;
    }
    switch (section) {
      case Section::none:
        throw ParseError("entry before any section header", line_no);
      case Section::hashtags: {
        if (fields.size() != 2) throw ParseError("expected hashtag,leaning", line_no);
        std::string tag;
        double leaning = 0.0;
        try {
          tag = normalize_hashtag(fields[0]);
          leaning = csv::parse_double(fields[1]);
        } catch (const Error& e) {
          throw ParseError(e.what(), line_no);
        }
        if (leaning != -1.0 && leaning != 0.0 && leaning != 1.0)
          throw ParseError("hashtag leaning must be -1, 0 or +1: " + fields[1], line_no);
        if (!cfg.hashtag_leanings.emplace(tag, leaning).second)
          throw ParseError("duplicate hashtag " + tag, line_no);
        break;
      }
      case Section::accounts: {
        if (fields.size() != 2) throw ParseError("expected account,leaning", line_no);
        double leaning = 0.0;
        try {
          leaning = csv::parse_double(fields[1]);
        } catch (const Error& e) {
          throw ParseError(e.what(), line_no);
        }
        if (leaning != -1.0 && leaning != 1.0)
          throw ParseError("account leaning must be -1 or +1: " + fields[1], line_no);
        if (fields[0].empty()) throw ParseError("empty account id", line_no);
        if (!cfg.account_leanings.emplace(fields[0], leaning).second)
          throw ParseError("duplicate account " + fields[0], line_no);
        break;
      }
      case Section::excluded:
        if (fields.size() != 1 || fields[0].empty()) throw ParseError("expected one account id", line_no);
        if (!cfg.excluded_accounts.insert(fields[0]).second)
          throw ParseError("duplicate excluded account " + fields[0], line_no);
        break;
    }
  }
  return cfg;
}

SeedConfig load_seed_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open seed config " + path.string());
  return parse_seed_config(in);
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<PostRecord> posts) : posts_(std::move(posts)) {
  id_index_.reserve(posts_.size());
  for (PostIndex i = 0; i < posts_.size(); ++i) {
    const auto& p = posts_[i];
    validate_references(p);
    if (!id_index_.emplace(p.post_id, i).second) throw ParseError("duplicate post_id " + p.post_id);
    by_author_[p.author_id].push_back(i);
    for (const auto& tag : p.hashtags) by_hashtag_[tag].push_back(i);
    if (p.kind == PostKind::retweet) ++retweet_counts_[p.author_id];
  }
}

const PostRecord* Corpus::find(std::string_view post_id) const {
  auto it = id_index_.find(std::string(post_id));
  return it == id_index_.end() ? nullptr : &posts_[it->second];
}

const std::vector<Corpus::PostIndex>& Corpus::posts_of(const std::string& author) const {
  static const std::vector<PostIndex> kEmpty;
  auto it = by_author_.find(author);
  return it == by_author_.end() ? kEmpty : it->second;
}

PostRecord parse_post_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  static const std::set<std::string> kAllowed = {"post_id", "author_id", "created_at", "kind",
                                                 "text", "referenced_post_id", "referenced_author_id"};
  for (const auto& [key, _] : j.items())
    if (!kAllowed.count(key)) throw ParseError("unknown field '" + key + "'");

  auto required = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw ParseError(std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  };
  auto optional = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };

  PostRecord p;
  p.post_id = required("post_id");
  p.author_id = required("author_id");
  if (p.post_id.empty() || p.author_id.empty()) throw ParseError("empty post_id or author_id");
  p.created_at = parse_timestamp(required("created_at"));
  p.kind = parse_post_kind(required("kind"));
  p.text = required("text");
  p.referenced_post_id = optional("referenced_post_id");
  p.referenced_author_id = optional("referenced_author_id");
  validate_references(p);
  p.hashtags = extract_hashtags(p.text);
  return p;
}

LoadResult parse_corpus(std::istream& in, bool strict) {
  std::vector<PostRecord> posts;
  std::unordered_set<std::string> ids;
  std::size_t skipped = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    PostRecord p;
    try {
      p = parse_post_line(line);
    } catch (const ParseError& e) {
      if (strict) throw ParseError(e.what(), line_no);
      ++skipped;
      continue;
    }
    if (!ids.insert(p.post_id).second) throw ParseError("duplicate post_id " + p.post_id, line_no);
    posts.push_back(std::move(p));
  }
  return LoadResult{Corpus(std::move(posts)), skipped};
}

LoadResult load_corpus(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + path.string());
  return parse_corpus(in, strict);
}

std::string post_to_json_line(const PostRecord& p) {
  nlohmann::ordered_json j;
  j["post_id"] = p.post_id;
  j["author_id"] = p.author_id;
  j["created_at"] = format_timestamp(p.created_at);
  j["kind"] = to_string(p.kind);
  j["text"] = p.text;
  if (p.referenced_post_id) j["referenced_post_id"] = *p.referenced_post_id;
  if (p.referenced_author_id) j["referenced_author_id"] = *p.referenced_author_id;
  return j.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& p : corpus.posts()) out << post_to_json_line(p) << '\n';
}

}  // namespace coordnet
