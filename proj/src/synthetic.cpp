#include "coordnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

std::vector<HashtagBlock> SyntheticSpec::default_blocks() {
  return {
      {-1.0,
       {"#VoteLabour", "#ForTheMany", "#VoteLabour2019", "#ForTheManyNotTheFew", "#ChangeIsComing", "#RealChange"},
       "#labtopic",
       40},
      {0.0, {"#GE2019", "#GeneralElection2019", "#GeneralElection19"}, "#campaign", 30},
      {1.0, {"#VoteConservative", "#BackBoris", "#GetBrexitDone", "#VoteConservative2019"}, "#contopic", 40},
  };
}

void SyntheticSpec::validate() const {
  auto rate = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + " must be in [0,1]");
  };
  if (n_users == 0 || n_posts == 0) throw DomainError("user and post counts must be positive");
  if (n_coordinated_groups == 0 || group_size == 0 || co_retweet_pool_size == 0 || coordinated_posts == 0)
    throw DomainError("coordinated group settings must be positive");
  if (group_size > n_users || n_coordinated_groups * group_size >= n_users)
    throw DomainError("planted groups do not fit in the user population");
  const std::size_t planted_posts = n_coordinated_groups * group_size * coordinated_posts;
  if (planted_posts + (n_users - n_coordinated_groups * group_size) > n_posts)
    throw DomainError("too few posts for the requested users and planted activity");
  rate(co_retweet_rate, "co_retweet_rate");
  rate(coordinated_original_share, "coordinated_original_share");
  rate(retweet_share, "retweet_share");
  rate(reply_share, "reply_share");
  rate(quote_share, "quote_share");
  rate(partisan_rate, "partisan_rate");
  rate(coordinated_toxicity, "coordinated_toxicity");
  rate(background_toxicity, "background_toxicity");
  rate(toxicity_spread, "toxicity_spread");
  rate(driver_amplitude, "driver_amplitude");
  if (retweet_share + reply_share + quote_share >= 1.0) throw DomainError("background kind shares must leave room for originals");
  if (!(activity_exponent > 1.0)) throw DomainError("activity_exponent must exceed 1");
  if (!(popularity_exponent >= 0.0)) throw DomainError("popularity_exponent must be nonnegative");
  if (!(coordinated_popularity_boost > 0.0)) throw DomainError("coordinated_popularity_boost must be positive");
  if (hours <= 0) throw DomainError("hours must be positive");
  if (hashtag_blocks.empty()) throw DomainError("at least one hashtag block is required");
  for (const auto& b : hashtag_blocks) {
    if (b.leaning < -1.0 || b.leaning > 1.0) throw DomainError("block leaning must be in [-1,1]");
    if (b.seed_tags.empty() && b.n_generic == 0) throw DomainError("hashtag block has no tags");
  }
  if (coupling) {
    if (coupling->lag_hours < 0) throw DomainError("coupling lag must be nonnegative");
    rate(coupling->strength, "coupling strength");
  }
}

namespace {

const std::vector<std::string> kFiller = {
    "the",     "vote",    "today",  "people",  "country", "future", "plan",    "jobs",   "schools", "nhs",
    "debate",  "tonight", "party",  "leader",  "policy",  "economy", "money",  "we",     "need",    "change",
    "campaign", "time",   "real",   "support", "local",   "council", "workers", "brexit", "deal",    "trust",
    "promise", "week",    "answer", "question", "voters", "polls",  "seat",    "win",    "manifesto", "budget"};

const std::vector<std::string> kToxic = {"idiot",   "idiots", "moron",   "scum",      "bastard", "wanker",
                                         "imbecile", "cretin", "idiotic", "disgusting", "vile",   "liars",
                                         "pathetic", "worthless", "crap", "filth"};

double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Discrete sampler over nonnegative weights.
class Sampler {
 public:
  void add(std::size_t item, double weight) {
    items_.push_back(item);
    total_ += weight;
    cumulative_.push_back(total_);
  }
  bool empty() const { return items_.empty(); }
  std::size_t draw(std::mt19937_64& rng) const {
    const double r = uniform_real(rng) * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    if (it == cumulative_.end()) --it;
    return items_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<std::size_t> items_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

struct Draft {
  std::size_t author;
  PostKind kind;
  Timestamp created_at{};
  std::string text;
  std::optional<std::size_t> ref;  // draft index of the referenced original
};

}  // namespace

SyntheticCorpus generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SyntheticCorpus out;
  auto& truth = out.truth;
  truth.coupling = spec.coupling;

  // Users
  const std::size_t n = spec.n_users;
  const int width = static_cast<int>(std::to_string(n - 1).size());
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string digits = std::to_string(i);
    names[i] = "u" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);
  std::vector<int> group(n, -1), side(n, 0);
  for (std::size_t g = 0; g < spec.n_coordinated_groups; ++g)
    for (std::size_t k = 0; k < spec.group_size; ++k) {
      const std::size_t u = order[g * spec.group_size + k];
      group[u] = static_cast<int>(g);
      side[u] = g % 2 == 0 ? -1 : 1;
    }
  std::vector<double> propensity(n);
  for (std::size_t u = 0; u < n; ++u) {
    if (group[u] < 0) {
      const double r = uniform_real(rng);
      side[u] = r < 0.45 ? -1 : (r < 0.85 ? 1 : 0);
    }
    const double base = group[u] >= 0 ? spec.coordinated_toxicity : spec.background_toxicity;
    propensity[u] = std::clamp(base + spec.toxicity_spread * (2.0 * uniform_real(rng) - 1.0), 0.0, 0.95);
  }
  for (std::size_t u = 0; u < n; ++u) {
    truth.user_side.emplace(names[u], side[u]);
    if (group[u] >= 0) truth.planted_group.emplace(names[u], group[u]);
  }

  // Hourly driver of coordinated content toxicity in (0, 1).
  truth.hourly_driver.resize(static_cast<std::size_t>(spec.hours));
  double latent = 0.0;
  for (auto& d : truth.hourly_driver) {
    latent = 0.9 * latent + 0.45 * normal(rng);
    d = 1.0 / (1.0 + std::exp(-latent));
  }
  auto hour_of = [&](Timestamp t) {
    return std::clamp<long>(static_cast<long>((t - spec.start) / std::chrono::hours(1)), 0, spec.hours - 1);
  };
  auto post_propensity = [&](std::size_t author, Timestamp t) {
    double p = propensity[author];
    const long h = hour_of(t);
    if (group[author] >= 0) {
      p += spec.driver_amplitude * (truth.hourly_driver[static_cast<std::size_t>(h)] - 0.5);
    } else if (spec.coupling && h - spec.coupling->lag_hours >= 0) {
      p += spec.coupling->strength * (truth.hourly_driver[static_cast<std::size_t>(h - spec.coupling->lag_hours)] - 0.5);
    }
    return std::clamp(p, 0.0, 0.95);
  };

  // Hashtags: seeds first so they dominate their block's popularity.
  struct Tag {
    std::string text;
    double weight;
  };
  std::vector<std::vector<Tag>> block_tags;
  std::optional<std::size_t> neutral_block;
  std::map<int, std::size_t> block_of_side;
  for (std::size_t b = 0; b < spec.hashtag_blocks.size(); ++b) {
    const auto& blk = spec.hashtag_blocks[b];
    std::vector<Tag> tags;
    for (const auto& t : blk.seed_tags) tags.push_back({t, 0.0});
    for (std::size_t k = 0; k < blk.n_generic; ++k) tags.push_back({blk.generic_prefix + std::to_string(k), 0.0});
    for (std::size_t r = 0; r < tags.size(); ++r) {
      tags[r].weight = 1.0 / static_cast<double>(r + 1);
      truth.hashtag_leaning.emplace(normalize_hashtag(tags[r].text), blk.leaning);
    }
    block_tags.push_back(std::move(tags));
    const int s = blk.leaning < 0 ? -1 : (blk.leaning > 0 ? 1 : 0);
    block_of_side.emplace(s, b);
    if (s == 0 && !neutral_block) neutral_block = b;
  }
  auto draw_tag = [&](std::size_t b) {
    const auto& tags = block_tags[b];
    double total = 0.0;
    for (const auto& t : tags) total += t.weight;
    double r = uniform_real(rng) * total;
    for (const auto& t : tags) {
      if (r < t.weight) return t.text;
      r -= t.weight;
    }
    return tags.back().text;
  };
  auto hashtags_for = [&](std::size_t author) {
    std::vector<std::string> out;
    auto own = block_of_side.find(side[author]);
    const std::size_t primary = own != block_of_side.end() ? own->second : uniform_index(rng, block_tags.size());
    const std::size_t count = 1 + uniform_index(rng, 2);
    for (std::size_t i = 0; i < count; ++i) out.push_back(draw_tag(primary));
    if (neutral_block && uniform_real(rng) < 0.3) out.push_back(draw_tag(*neutral_block));
    return out;
  };
  // A post is heated with probability p; heated posts are mostly lexicon terms.
  auto words = [&](double p) {
    const double toxic_share = uniform_real(rng) < p ? 0.9 : 0.05;
    std::string s;
    const std::size_t count = 8 + uniform_index(rng, 7);
    for (std::size_t i = 0; i < count; ++i) {
      if (i) s += ' ';
      s += uniform_real(rng) < toxic_share ? kToxic[uniform_index(rng, kToxic.size())]
                                           : kFiller[uniform_index(rng, kFiller.size())];
    }
    return s;
  };

  // Post slots: planted users have fixed activity, background users a Pareto
  // share of the rest with at least one post each.
  std::vector<std::pair<std::size_t, PostKind>> slots;
  const std::size_t planted_originals =
      static_cast<std::size_t>(std::llround(spec.coordinated_original_share * static_cast<double>(spec.coordinated_posts)));
  std::vector<std::size_t> background;
  for (std::size_t u = 0; u < n; ++u) {
    if (group[u] < 0) {
      background.push_back(u);
      continue;
    }
    for (std::size_t k = 0; k < spec.coordinated_posts; ++k)
      slots.emplace_back(u, k < planted_originals ? PostKind::original : PostKind::retweet);
  }
  const std::size_t rest = spec.n_posts - slots.size() - background.size();
  std::vector<double> weight(background.size());
  double wsum = 0.0;
  for (auto& w : weight) {
    w = std::pow(1.0 - uniform_real(rng), -1.0 / spec.activity_exponent);
    wsum += w;
  }
  std::vector<std::size_t> count(background.size(), 1);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < background.size(); ++i) {
    const double share = static_cast<double>(rest) * weight[i] / wsum;
    const auto whole = static_cast<std::size_t>(share);
    count[i] += whole;
    assigned += whole;
    remainders.emplace_back(share - static_cast<double>(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < rest; ++k, ++assigned) ++count[remainders[k % remainders.size()].second];
  const double c_rt = spec.retweet_share, c_rp = c_rt + spec.reply_share, c_q = c_rp + spec.quote_share;
  for (std::size_t i = 0; i < background.size(); ++i)
    for (std::size_t k = 0; k < count[i]; ++k) {
      const double r = uniform_real(rng);
      slots.emplace_back(background[i], r < c_rt   ? PostKind::retweet
                                        : r < c_rp ? PostKind::reply
                                        : r < c_q  ? PostKind::quote
                                                   : PostKind::original);
    }

  // Originals with popularity weights.
  const auto window = std::chrono::seconds(static_cast<long>(spec.hours) * 3600);
  std::vector<Draft> drafts;
  for (const auto& [author, kind] : slots) {
    if (kind != PostKind::original) continue;
    Draft d{author, kind, spec.start + std::chrono::seconds(static_cast<long>(uniform_index(rng, window.count()))), "", {}};
    std::string text = words(post_propensity(author, d.created_at));
    for (const auto& tag : hashtags_for(author)) text += " " + tag;
    d.text = std::move(text);
    drafts.push_back(std::move(d));
  }
  if (drafts.empty()) throw DomainError("spec produces no original posts");
  const std::size_t n_originals = drafts.size();
  std::vector<std::size_t> rank(n_originals);
  std::iota(rank.begin(), rank.end(), 1);
  shuffle_in_place(rank, rng);
  Sampler all, by_side_neg, by_side_pos;
  std::map<int, std::vector<std::size_t>> pool_candidates;
  for (std::size_t i = 0; i < n_originals; ++i) {
    const std::size_t a = drafts[i].author;
    double w = std::pow(static_cast<double>(rank[i]), -spec.popularity_exponent);
    if (group[a] >= 0) w *= spec.coordinated_popularity_boost;
    all.add(i, w);
    if (side[a] < 0) by_side_neg.add(i, w);
    if (side[a] > 0) by_side_pos.add(i, w);
    if (group[a] < 0) pool_candidates[side[a]].push_back(i);
  }
  std::vector<std::vector<std::size_t>> pools(spec.n_coordinated_groups);
  for (std::size_t g = 0; g < spec.n_coordinated_groups; ++g) {
    auto cands = pool_candidates[g % 2 == 0 ? -1 : 1];
    if (cands.size() < spec.co_retweet_pool_size) cands = pool_candidates[0];
    if (cands.size() < spec.co_retweet_pool_size) throw DomainError("not enough originals to fill a co-retweet pool");
    shuffle_in_place(cands, rng);
    pools[g].assign(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(spec.co_retweet_pool_size));
  }

  // Retweets, replies and quotes of originals.
  const auto handle = [&](std::size_t draft) { return names[drafts[draft].author]; };
  for (const auto& [author, kind] : slots) {
    if (kind == PostKind::original) continue;
    std::size_t ref;
    if (group[author] >= 0 && kind == PostKind::retweet && uniform_real(rng) < spec.co_retweet_rate) {
      const auto& pool = pools[static_cast<std::size_t>(group[author])];
      ref = pool[uniform_index(rng, pool.size())];
    } else if (side[author] != 0 && uniform_real(rng) < spec.partisan_rate) {
      const auto& s = side[author] < 0 ? by_side_neg : by_side_pos;
      ref = s.empty() ? all.draw(rng) : s.draw(rng);
    } else {
      ref = all.draw(rng);
    }
    const double delay = -std::log(1.0 - uniform_real(rng)) * 1800.0;
    Timestamp t = drafts[ref].created_at + std::chrono::seconds(1 + static_cast<long>(delay));
    t = std::min(t, spec.start + window - std::chrono::seconds(1));
    Draft d{author, kind, t, "", ref};
    if (kind == PostKind::retweet) {
      d.text = "RT @" + handle(ref) + ": " + drafts[ref].text;
    } else if (kind == PostKind::reply) {
      d.text = "@" + handle(ref) + " " + words(post_propensity(author, t));
      if (uniform_real(rng) < 0.4)
        for (const auto& tag : hashtags_for(author)) d.text += " " + tag;
    } else {
      d.text = words(post_propensity(author, t));
      for (const auto& tag : hashtags_for(author)) d.text += " " + tag;
    }
    drafts.push_back(std::move(d));
  }

  // Chronological ids.
  std::vector<std::size_t> chrono(drafts.size());
  std::iota(chrono.begin(), chrono.end(), 0);
  std::stable_sort(chrono.begin(), chrono.end(),
                   [&](std::size_t a, std::size_t b) { return drafts[a].created_at < drafts[b].created_at; });
  std::vector<std::string> ids(drafts.size());
  const int id_width = static_cast<int>(std::to_string(drafts.size()).size());
  for (std::size_t k = 0; k < chrono.size(); ++k) {
    std::string digits = std::to_string(k + 1);
    ids[chrono[k]] = "p" + std::string(static_cast<std::size_t>(id_width) - digits.size(), '0') + digits;
  }
  std::vector<PostRecord> posts;
  posts.reserve(drafts.size());
  for (std::size_t k : chrono) {
    const auto& d = drafts[k];
    PostRecord p;
    p.post_id = ids[k];
    p.author_id = names[d.author];
    p.created_at = d.created_at;
    p.kind = d.kind;
    p.text = d.text;
    p.hashtags = extract_hashtags(d.text);
    if (d.ref) {
      p.referenced_post_id = ids[*d.ref];
      p.referenced_author_id = names[drafts[*d.ref].author];
    }
    posts.push_back(std::move(p));
  }
  out.corpus = Corpus(std::move(posts));
  return out;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir) {
  {
    std::ostringstream ss;
    csv::Writer w(ss);
    w.row("user", "group");
    for (const auto& [user, g] : truth.planted_group) w.row(user, g);
    write_file_atomic(dir / "planted_users.csv", ss.str());
  }
  {
    std::ostringstream ss;
    csv::Writer w(ss);
    w.row("user", "side");
    for (const auto& [user, s] : truth.user_side) w.row(user, s);
    write_file_atomic(dir / "user_sides.csv", ss.str());
  }
  {
    std::ostringstream ss;
    csv::Writer w(ss);
    w.row("hashtag", "leaning");
    for (const auto& [tag, l] : truth.hashtag_leaning) w.row(tag, l);
    write_file_atomic(dir / "hashtag_truth.csv", ss.str());
  }
  {
    std::ostringstream ss;
    csv::Writer w(ss);
    w.row("lag_hours", "strength");
    if (truth.coupling) w.row(truth.coupling->lag_hours, truth.coupling->strength);
    write_file_atomic(dir / "coupling.csv", ss.str());
  }
}

}  // namespace coordnet
