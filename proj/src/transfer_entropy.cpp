#include "coordnet/transfer_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"
#include "coordnet/stats.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

namespace {

using std::chrono::hours;

bool hour_aligned(Timestamp t) { return t.time_since_epoch() % hours(1) == std::chrono::seconds(0); }

}  // namespace

HourlySeries hourly_series(std::span<const TimedValue> points, Timestamp start, Timestamp end) {
  if (!hour_aligned(start) || !hour_aligned(end)) throw DomainError("hourly window must be hour-aligned");
  if (end < start) throw DomainError("hourly window ends before it starts");
  const auto n = static_cast<std::size_t>((end - start) / hours(1));
  HourlySeries s;
  s.start_hour = start;
  s.values.assign(n, std::nullopt);
  s.counts.assign(n, 0);
  std::vector<double> sums(n, 0.0);
  for (const auto& p : points) {
    if (p.timestamp < start || p.timestamp >= end) continue;
    const auto h = static_cast<std::size_t>((p.timestamp - start) / hours(1));
    sums[h] += p.value;
    ++s.counts[h];
  }
  for (std::size_t h = 0; h < n; ++h)
    if (s.counts[h]) s.values[h] = sums[h] / static_cast<double>(s.counts[h]);
  return s;
}

std::pair<Timestamp, Timestamp> hour_window(std::span<const TimedValue> points) {
  if (points.empty()) throw DomainError("no points to span");
  auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                      [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return {std::chrono::floor<hours>(lo->timestamp), std::chrono::floor<hours>(hi->timestamp) + hours(1)};
}

std::vector<double> quantile_bounds(std::span<const double> values, std::span<const double> probs) {
  if (values.empty()) throw DomainError("quantile bins need values");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0 && probs[i] < 1.0)) throw DomainError("quantile probabilities must lie in (0,1)");
    if (i && !(probs[i] > probs[i - 1])) throw DomainError("quantile probabilities must be strictly increasing");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> bounds;
  for (double p : probs) bounds.push_back(quantile_sorted(sorted, p));
  return bounds;
}

std::vector<int> quantile_bins(std::span<const double> values, std::span<const double> probs) {
  const auto bounds = quantile_bounds(values, probs);
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values)
    out.push_back(static_cast<int>(std::lower_bound(bounds.begin(), bounds.end(), v) - bounds.begin()));
  return out;
}

SymbolSeries symbolize(const HourlySeries& series, std::span<const double> probs) {
  std::vector<double> present;
  for (const auto& v : series.values)
    if (v) present.push_back(*v);
  const auto symbols = quantile_bins(present, probs);
  SymbolSeries out(series.values.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (series.values[i]) out[i] = symbols[k++];
  return out;
}

namespace {

struct Transitions {
  std::vector<std::uint64_t> target_hist, source_hist;
  std::vector<int> next;
};

std::uint64_t alphabet(const SymbolSeries& x, const SymbolSeries& y) {
  int hi = 0;
  for (const auto* s : {&x, &y})
    for (const auto& v : *s)
      if (v) {
        if (*v < 0) throw DomainError("symbols must be nonnegative");
        hi = std::max(hi, *v);
      }
  return static_cast<std::uint64_t>(hi) + 1;
}

Transitions collect(const SymbolSeries& x, const SymbolSeries& y, int history, std::uint64_t base) {
  if (x.size() != y.size()) throw DomainError("series must be aligned");
  Transitions tr;
  const std::size_t h = static_cast<std::size_t>(history);
  for (std::size_t t = h - 1; t + 1 < y.size(); ++t) {
    bool complete = y[t + 1].has_value();
    std::uint64_t hy = 0, hx = 0;
    for (std::size_t j = t + 1 - h; complete && j <= t; ++j) {
      complete = x[j] && y[j];
      if (!complete) break;
      hy = hy * base + static_cast<std::uint64_t>(*y[j]);
      hx = hx * base + static_cast<std::uint64_t>(*x[j]);
    }
    if (!complete) continue;
    tr.target_hist.push_back(hy);
    tr.source_hist.push_back(hx);
    tr.next.push_back(*y[t + 1]);
  }
  return tr;
}

// sum over conditioning patterns c of phi_q(c) * sum_a p(a|c)^q.
double escort_sum(const std::vector<std::uint64_t>& cond, const std::vector<int>& next, std::uint64_t base,
                  double q) {
  std::unordered_map<std::uint64_t, double> c_count, ca_count;
  for (std::size_t i = 0; i < cond.size(); ++i) {
    c_count[cond[i]] += 1.0;
    ca_count[cond[i] * base + static_cast<std::uint64_t>(next[i])] += 1.0;
  }
  const double n = static_cast<double>(cond.size());
  double norm = 0.0;
  for (const auto& [_, c] : c_count) norm += std::pow(c / n, q);
  double sum = 0.0;
  for (const auto& [key, ca] : ca_count) {
    const double c = c_count.at(key / base);
    sum += std::pow(c / n, q) / norm * std::pow(ca / c, q);
  }
  return sum;
}

}  // namespace

TeEstimate renyi_te(const SymbolSeries& x, const SymbolSeries& y, double q, int history) {
  if (!(q > 0.0) || q == 1.0) throw DomainError("Renyi q must be positive and different from 1");
  if (history < 1) throw DomainError("history must be at least 1");
  const std::uint64_t base = alphabet(x, y);
  if (std::pow(static_cast<double>(base), 2.0 * history + 1.0) > 1e18) throw DomainError("pattern space too large");
  const auto tr = collect(x, y, history, base);
  if (tr.next.size() < kMinTransitions) throw DegenerateError("too few complete transitions for transfer entropy");

  std::uint64_t hist_span = 1;
  for (int i = 0; i < history; ++i) hist_span *= base;
  std::vector<std::uint64_t> joint(tr.next.size());
  for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = tr.target_hist[i] * hist_span + tr.source_hist[i];

  const double num = escort_sum(tr.target_hist, tr.next, base, q);
  const double den = escort_sum(joint, tr.next, base, q);
  return {std::log2(num / den) / (1.0 - q), tr.next.size()};
}

namespace {

// Order-h Markov chain fitted to the present stretches of a symbol series.
class MarkovSource {
 public:
  MarkovSource(const SymbolSeries& s, int history, std::uint64_t base) : h_(static_cast<std::size_t>(history)), base_(base) {
    for (std::size_t t = h_ - 1; t + 1 < s.size(); ++t) {
      bool complete = s[t + 1].has_value();
      for (std::size_t j = t + 1 - h_; complete && j <= t; ++j) complete = s[j].has_value();
      if (!complete) continue;
      std::vector<int> hist;
      for (std::size_t j = t + 1 - h_; j <= t; ++j) hist.push_back(*s[j]);
      successors_[key(hist)].push_back(*s[t + 1]);
      starts_.push_back(std::move(hist));
    }
    if (starts_.empty()) throw DegenerateError("source series has no complete transition");
  }

  SymbolSeries sample(const SymbolSeries& mask, std::mt19937_64& rng) const {
    const std::size_t n = mask.size();
    std::vector<int> chain;
    chain.reserve(n);
    while (chain.size() < n) {
      const auto& start = starts_[uniform_index(rng, starts_.size())];
      for (int v : start)
        if (chain.size() < n) chain.push_back(v);
      while (chain.size() < n) {
        auto it = successors_.find(key({chain.end() - static_cast<std::ptrdiff_t>(h_), chain.end()}));
        if (it == successors_.end()) break;
        chain.push_back(it->second[uniform_index(rng, it->second.size())]);
      }
    }
    SymbolSeries out(n);
    for (std::size_t t = 0; t < n; ++t)
      if (mask[t]) out[t] = chain[t];
    return out;
  }

 private:
  std::uint64_t key(const std::vector<int>& hist) const {
    std::uint64_t k = 0;
    for (int v : hist) k = k * base_ + static_cast<std::uint64_t>(v);
    return k;
  }

  std::size_t h_;
  std::uint64_t base_;
  std::unordered_map<std::uint64_t, std::vector<int>> successors_;
  std::vector<std::vector<int>> starts_;
};

}  // namespace

TeTest te_significance(const SymbolSeries& x, const SymbolSeries& y, double q, int history, int bootstraps,
                       std::uint64_t seed) {
  if (bootstraps < 1) throw DomainError("bootstraps must be positive");
  TeTest out;
  out.estimate = renyi_te(x, y, q, history);
  out.bootstraps = bootstraps;
  const MarkovSource source(x, history, alphabet(x, y));
  std::vector<char> exceed(static_cast<std::size_t>(bootstraps), 0);
  parallel_for(exceed.size(), [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    const auto xb = source.sample(x, rng);
    try {
      exceed[b] = renyi_te(xb, y, q, history).te >= out.estimate.te;
    } catch (const DegenerateError&) {
      exceed[b] = 0;
    }
  });
  const auto count = static_cast<double>(std::count(exceed.begin(), exceed.end(), 1));
  out.p_value = (1.0 + count) / (static_cast<double>(bootstraps) + 1.0);
  return out;
}

void write_hourly_series(const HourlySeries& series, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("hour", "mean_toxicity", "count");
  for (std::size_t h = 0; h < series.values.size(); ++h) {
    const auto& v = series.values[h];
    w.row(format_timestamp(series.start_hour + hours(static_cast<long>(h))),
          v ? csv::format_double(*v) : std::string(), series.counts[h]);
  }
  write_file_atomic(path, ss.str());
}

void write_te_summary(std::span<const TeRow> rows, const std::filesystem::path& path) {
  std::ostringstream ss;
  csv::Writer w(ss);
  w.row("direction", "q", "history", "te", "p_value", "n_transitions");
  for (const auto& r : rows) {
    if (r.test)
      w.row(r.direction, r.q, r.history, r.test->estimate.te, r.test->p_value, r.test->estimate.n_transitions);
    else
      w.row(r.direction, r.q, r.history, "", "", "");
  }
  write_file_atomic(path, ss.str());
}

}  // namespace coordnet
