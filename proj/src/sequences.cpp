#include "coordnet/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

std::string UserActivitySequence::encoded() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += '>';
    out += steps[i].kind == ActionKind::P ? 'P' : 'I';
  }
  return out;
}

UserActivitySequence encode_actions(const std::string& user, std::vector<const PostRecord*> posts) {
  std::stable_sort(posts.begin(), posts.end(), [](const PostRecord* a, const PostRecord* b) {
    if (a->created_at != b->created_at) return a->created_at < b->created_at;
    return a->post_id < b->post_id;
  });
  UserActivitySequence seq{user, {}};
  for (const PostRecord* p : posts) {
    if (p->kind != PostKind::original && !p->referenced_post_id)
      throw DomainError("post " + p->post_id + " lacks its referenced post");
    switch (p->kind) {
      case PostKind::original:
        seq.steps.push_back({ActionKind::P, p->post_id, std::nullopt, p->created_at});
        break;
      case PostKind::retweet:
        seq.steps.push_back({ActionKind::I, p->post_id, p->referenced_post_id, p->created_at});
        break;
      case PostKind::reply:
      case PostKind::quote:
        seq.steps.push_back({ActionKind::I, p->post_id, p->referenced_post_id, p->created_at});
        seq.steps.push_back({ActionKind::P, p->post_id, std::nullopt, p->created_at});
        break;
    }
  }
  return seq;
}

std::optional<UserActivitySequence> trim_sequence(const UserActivitySequence& seq) {
  const auto& s = seq.steps;
  std::size_t begin = 0, end = s.size();
  while (begin < end && s[begin].kind == ActionKind::P) ++begin;
  while (end > begin && s[end - 1].kind == ActionKind::I) --end;
  // After trimming, a nonempty remainder starts with I and ends with P.
  if (begin == end) return std::nullopt;
  UserActivitySequence out{seq.user, {s.begin() + static_cast<std::ptrdiff_t>(begin),
                                      s.begin() + static_cast<std::ptrdiff_t>(end)}};
  return out;
}

std::optional<double> InteractionContext::toxicity_of(const ActionStep& step) const {
  if (step.referenced_post_id)
    if (auto t = toxicity->find(*step.referenced_post_id)) return t;
  const PostRecord* own = corpus->find(step.post_id);
  if (own && own->kind == PostKind::retweet) return toxicity->find(own->post_id);
  return std::nullopt;
}

std::optional<double> InteractionContext::leaning_of(const ActionStep& step) const {
  if (!post_leaning) return std::nullopt;
  if (step.referenced_post_id) {
    auto it = post_leaning->find(*step.referenced_post_id);
    if (it != post_leaning->end()) return it->second;
  }
  const PostRecord* own = corpus->find(step.post_id);
  if (own && own->kind == PostKind::retweet) {
    auto it = post_leaning->find(own->post_id);
    if (it != post_leaning->end()) return it->second;
  }
  return std::nullopt;
}

bool InteractionContext::coordinated_author(const ActionStep& step) const {
  const PostRecord* own = corpus->find(step.post_id);
  std::optional<std::string> author;
  if (own && own->referenced_author_id) author = own->referenced_author_id;
  if (!author && step.referenced_post_id)
    if (const PostRecord* ref = corpus->find(*step.referenced_post_id)) author = ref->author_id;
  return author && coordinated->count(*author) > 0;
}

std::vector<BlockPair> segment_blocks(const UserActivitySequence& trimmed, const InteractionContext& ctx,
                                      double toxic_threshold) {
  std::vector<BlockPair> out;
  const auto& s = trimmed.steps;
  std::size_t i = 0;
  while (i < s.size()) {
    InteractionBlock ib;
    std::size_t n_coord = 0, n_lean = 0;
    double lean_sum = 0.0;
    for (; i < s.size() && s[i].kind == ActionKind::I; ++i) {
      ++ib.n;
      if (ctx.coordinated_author(s[i])) ++n_coord;
      if (auto t = ctx.toxicity_of(s[i])) {
        ++ib.n_scored;
        if (*t > toxic_threshold) ++ib.n_toxic;
        if (*t < toxic_threshold) ++ib.n_below;
      }
      if (auto l = ctx.leaning_of(s[i])) {
        ++n_lean;
        lean_sum += *l;
      }
    }
    ProductionBlock pb;
    double prod_sum = 0.0;
    std::size_t n_prod = 0;
    for (; i < s.size() && s[i].kind == ActionKind::P; ++i) {
      ++n_prod;
      if (auto t = ctx.toxicity->find(s[i].post_id)) {
        ++pb.n;
        prod_sum += *t;
      }
    }
    if (ib.n == 0 || n_prod == 0) continue;  // only possible on untrimmed input
    if (ib.n_scored == 0 || pb.n == 0) continue;
    ib.toxic_fraction = static_cast<double>(ib.n_toxic) / static_cast<double>(ib.n_scored);
    ib.coordinated_fraction = static_cast<double>(n_coord) / static_cast<double>(ib.n);
    if (n_lean) ib.mean_leaning = lean_sum / static_cast<double>(n_lean);
    pb.mean_toxicity = prod_sum / static_cast<double>(pb.n);
    out.push_back({trimmed.user, out.size(), ib, pb});
  }
  return out;
}

std::vector<BlockPair> collect_block_pairs(const InteractionContext& ctx, double toxic_threshold) {
  std::vector<std::string> users;
  for (const auto& [user, _] : ctx.corpus->by_author())
    if (!ctx.coordinated->count(user)) users.push_back(user);
  std::vector<std::vector<BlockPair>> per_user(users.size());
  parallel_for(users.size(), [&](std::size_t u) {
    std::vector<const PostRecord*> posts;
    for (auto idx : ctx.corpus->posts_of(users[u])) posts.push_back(&ctx.corpus->posts()[idx]);
    if (auto trimmed = trim_sequence(encode_actions(users[u], std::move(posts))))
      per_user[u] = segment_blocks(*trimmed, ctx, toxic_threshold);
  });
  std::vector<BlockPair> out;
  for (auto& v : per_user)
    for (auto& p : v) out.push_back(std::move(p));
  return out;
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::vector<std::string> condition_labels(const BlockPair& pair, Condition condition,
                                          const std::map<std::string, double>& user_leaning) {
  const auto& ib = pair.interaction;
  std::optional<std::string> group;
  if (ib.coordinated_fraction == 1.0) group = "coordinated";
  if (ib.coordinated_fraction == 0.0) group = "non_coordinated";
  std::optional<std::string> label;
  switch (condition) {
    case Condition::author_group:
      return group ? std::vector<std::string>{*group} : std::vector<std::string>{};
    case Condition::toxicity_class:
      if (ib.n_toxic == ib.n_scored) label = "toxic";
      if (ib.n_below == ib.n_scored) label = "non_toxic";
      break;
    case Condition::leaning_align: {
      auto it = user_leaning.find(pair.user);
      if (it == user_leaning.end() || sign(it->second) == 0) break;
      if (!ib.mean_leaning || sign(*ib.mean_leaning) == 0) break;
      label = sign(*ib.mean_leaning) == sign(it->second) ? "same_leaning" : "opposite_leaning";
      break;
    }
  }
  if (!label) return {};
  std::vector<std::string> out{*label};
  if (group) out.push_back(*label + ":" + *group);
  return out;
}

std::map<std::string, BootstrapSummary> conditioned_means(std::span<const BlockPair> pairs, Condition condition,
                                                          const std::map<std::string, double>& user_leaning,
                                                          int replicates, std::uint64_t seed) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& p : pairs)
    for (const auto& label : condition_labels(p, condition, user_leaning))
      groups[label].push_back(p.production.mean_toxicity);
  std::map<std::string, BootstrapSummary> out;
  std::uint64_t index = 0;
  for (const auto& [label, values] : groups)
    out.emplace(label, bootstrap_mean(values, replicates, derive_seed(seed, index++)));
  return out;
}

void write_block_pairs(std::span<const BlockPair> pairs, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("user", "pair_index", "toxic_fraction", "coordinated_fraction", "mean_leaning", "production_mean_toxicity",
        "n_interactions", "n_productions");
  for (const auto& p : pairs) {
    const auto& ib = p.interaction;
    w.row(p.user, p.pair_index, ib.toxic_fraction, ib.coordinated_fraction,
          ib.mean_leaning ? csv::format_double(*ib.mean_leaning) : std::string(), p.production.mean_toxicity, ib.n,
          p.production.n);
  }
  write_file_atomic(path, ss.str());
}

ActionStreams collect_action_streams(const InteractionContext& ctx) {
  ActionStreams out;
  for (const auto& [user, indices] : ctx.corpus->by_author()) {
    if (ctx.coordinated->count(user)) continue;
    std::vector<const PostRecord*> posts;
    for (auto idx : indices) posts.push_back(&ctx.corpus->posts()[idx]);
    for (const auto& step : encode_actions(user, std::move(posts)).steps) {
      if (step.kind == ActionKind::P) {
        if (auto t = ctx.toxicity->find(step.post_id)) out.productions.push_back({step.timestamp, *t});
        continue;
      }
      auto t = ctx.toxicity_of(step);
      if (!t) continue;
      out.interactions.push_back({step.timestamp, *t});
      if (ctx.coordinated_author(step)) out.coordinated_interactions.push_back({step.timestamp, *t});
    }
  }
  return out;
}

}  // namespace coordnet
