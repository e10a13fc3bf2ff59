#include "coordnet/user_metrics.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <vector>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

std::optional<UserToxicity> user_toxicity(std::span<const ScoredPost> posts, double top_fraction,
                                          bool include_retweets) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw DomainError("top_fraction must be in (0,1]");
  std::vector<double> values;
  for (const auto& p : posts) {
    const bool eligible = p.kind == PostKind::original || (include_retweets && p.kind == PostKind::retweet);
    if (eligible && p.toxicity) values.push_back(*p.toxicity);
  }
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end(), std::greater<>());
  const std::size_t top = std::max<std::size_t>(1, ceil_fraction(top_fraction, values.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += values[i];
  return UserToxicity{sum / static_cast<double>(top), values.size(), top};
}

std::set<std::string> filter_min_activity(const std::map<std::string, std::size_t>& counts, std::size_t minimum) {
  std::set<std::string> out;
  for (const auto& [user, c] : counts)
    if (c >= minimum) out.insert(user);
  return out;
}

std::map<std::string, std::size_t> activity_counts(const Corpus& corpus) {
  std::map<std::string, std::size_t> out;
  for (const auto& [user, indices] : corpus.by_author()) {
    std::size_t c = 0;
    for (auto idx : indices) {
      const auto kind = corpus.posts()[idx].kind;
      if (kind == PostKind::original || kind == PostKind::retweet) ++c;
    }
    out.emplace(user, c);
  }
  return out;
}

std::map<std::string, UserToxicity> all_user_toxicity(const Corpus& corpus, const ToxicityTable& toxicity,
                                                      double top_fraction, bool include_retweets) {
  std::map<std::string, UserToxicity> out;
  std::vector<ScoredPost> posts;
  for (const auto& [user, indices] : corpus.by_author()) {
    posts.clear();
    for (auto idx : indices) {
      const auto& p = corpus.posts()[idx];
      posts.push_back({p.kind, toxicity.find(p.post_id)});
    }
    if (auto t = user_toxicity(posts, top_fraction, include_retweets)) out.emplace(user, *t);
  }
  return out;
}

void write_user_toxicity(const std::map<std::string, UserToxicity>& table, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("user", "toxicity", "n_posts", "n_top");
  for (const auto& [user, t] : table) w.row(user, t.value, t.n_posts_considered, t.n_top_used);
  write_file_atomic(path, ss.str());
}

std::map<std::string, UserToxicity> read_user_toxicity(const std::filesystem::path& path) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"user", "toxicity", "n_posts", "n_top"})
    throw ParseError("bad user toxicity header in " + path.string());
  std::map<std::string, UserToxicity> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw ParseError("bad user toxicity row", i + 1);
    out.emplace(rows[i][0], UserToxicity{csv::parse_double(rows[i][1]),
                                         static_cast<std::size_t>(csv::parse_double(rows[i][2])),
                                         static_cast<std::size_t>(csv::parse_double(rows[i][3]))});
  }
  return out;
}

}  // namespace coordnet
