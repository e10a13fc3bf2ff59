#include "coordnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "coordnet/error.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability must be in [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson_or_nan(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nan("");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double weighted_pearson_or_nan(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nan("");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Interval percentile_interval(std::vector<double> reps) {
  std::sort(reps.begin(), reps.end());
  return {quantile_sorted(reps, 0.025), quantile_sorted(reps, 0.975)};
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson needs equal-length samples");
  if (x.size() < 2) throw DomainError("pearson needs at least 2 points");
  const double r = pearson_or_nan(x, y);
  if (std::isnan(r)) throw DegenerateError("zero variance in correlation input");
  return r;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y, int replicates, std::uint64_t seed) {
  if (x.size() != y.size()) throw DomainError("spearman needs equal-length samples");
  if (x.size() < 3) throw DomainError("spearman needs at least 3 points");
  if (replicates < 1) throw DomainError("replicates must be positive");
  SpearmanResult out;
  out.rho = pearson(fractional_ranks(x), fractional_ranks(y));

  const std::size_t n = x.size();
  std::vector<double> reps(static_cast<std::size_t>(replicates), std::nan(""));
  parallel_for(reps.size(), [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    std::vector<double> bx(n), by(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = uniform_index(rng, n);
      bx[i] = x[k];
      by[i] = y[k];
    }
    reps[r] = pearson_or_nan(fractional_ranks(bx), fractional_ranks(by));
  });
  std::erase_if(reps, [](double v) { return std::isnan(v); });
  out.replicates = static_cast<int>(reps.size());
  out.ci = reps.empty() ? Interval{out.rho, out.rho} : percentile_interval(std::move(reps));
  return out;
}

BootstrapSummary bootstrap_mean(std::span<const double> values, int replicates, std::uint64_t seed) {
  if (values.empty()) throw DomainError("bootstrap of an empty sample");
  if (replicates < 1) throw DomainError("replicates must be positive");
  BootstrapSummary out;
  out.mean = mean(values);
  out.replicates = replicates;
  out.seed = seed;
  const std::size_t n = values.size();
  out.distribution.resize(static_cast<std::size_t>(replicates));
  parallel_for(out.distribution.size(), [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[uniform_index(rng, n)];
    out.distribution[r] = s / static_cast<double>(n);
  });
  const auto ci = percentile_interval(out.distribution);
  out.ci_low = ci.low;
  out.ci_high = ci.high;
  return out;
}

namespace {

struct EndpointPairs {
  std::vector<std::uint32_t> a, b;  // indices into the attributed-node list
  std::vector<double> w;
};

EndpointPairs attributed_edges(const WeightedNetwork& net, const std::map<std::string, double>& attr,
                               std::vector<double>& values) {
  std::vector<std::int64_t> slot(net.node_count(), -1);
  for (NodeId i = 0; i < net.node_count(); ++i) {
    auto it = attr.find(net.name(i));
    if (it == attr.end()) continue;
    slot[i] = static_cast<std::int64_t>(values.size());
    values.push_back(it->second);
  }
  EndpointPairs pairs;
  for (const auto& e : net.edges()) {
    if (slot[e.u] < 0 || slot[e.v] < 0) continue;
    pairs.a.push_back(static_cast<std::uint32_t>(slot[e.u]));
    pairs.b.push_back(static_cast<std::uint32_t>(slot[e.v]));
    pairs.w.push_back(e.weight);
  }
  return pairs;
}

double assortativity_of(const EndpointPairs& pairs, const std::vector<double>& values, bool weighted) {
  const std::size_t m = pairs.a.size();
  std::vector<double> x(2 * m), y(2 * m), w;
  for (std::size_t i = 0; i < m; ++i) {
    x[2 * i] = y[2 * i + 1] = values[pairs.a[i]];
    y[2 * i] = x[2 * i + 1] = values[pairs.b[i]];
  }
  if (!weighted) return pearson_or_nan(x, y);
  w.resize(2 * m);
  for (std::size_t i = 0; i < m; ++i) w[2 * i] = w[2 * i + 1] = pairs.w[i];
  return weighted_pearson_or_nan(x, y, w);
}

}  // namespace

double assortativity(const WeightedNetwork& net, const std::map<std::string, double>& attr, bool weighted) {
  std::vector<double> values;
  const auto pairs = attributed_edges(net, attr, values);
  if (pairs.a.size() < 2) throw DegenerateError("assortativity needs at least 2 attributed edges");
  const double r = assortativity_of(pairs, values, weighted);
  if (std::isnan(r)) throw DegenerateError("zero attribute variance over edge endpoints");
  return r;
}

ShuffleTest shuffle_zscore(const WeightedNetwork& net, const std::map<std::string, double>& attr, int shuffles,
                           std::uint64_t seed, bool weighted) {
  if (shuffles < 2) throw DomainError("shuffle test needs at least 2 shuffles");
  std::vector<double> values;
  const auto pairs = attributed_edges(net, attr, values);
  if (pairs.a.size() < 2) throw DegenerateError("assortativity needs at least 2 attributed edges");
  ShuffleTest out;
  out.observed = assortativity_of(pairs, values, weighted);
  if (std::isnan(out.observed)) throw DegenerateError("zero attribute variance over edge endpoints");

  std::vector<double> null(static_cast<std::size_t>(shuffles));
  parallel_for(null.size(), [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    auto permuted = values;
    shuffle_in_place(permuted, rng);
    null[r] = assortativity_of(pairs, permuted, weighted);
  });
  std::erase_if(null, [](double v) { return std::isnan(v); });
  if (null.size() < 2) throw DegenerateError("shuffled assortativity is undefined");
  out.null_mean = mean(null);
  out.null_sd = sample_sd(null);
  if (!(out.null_sd > 1e-12 * std::max(1.0, std::abs(out.null_mean))))
    throw DegenerateError("shuffle null distribution has zero spread");
  out.z = (out.observed - out.null_mean) / out.null_sd;
  return out;
}

namespace {

// Pooled sample in ascending order, grouped into distinct values.
struct PooledAD {
  std::vector<std::size_t> run_length;  // l_j
  std::vector<std::size_t> sizes;       // n_i
  std::size_t total = 0;
};

// labels[p] = sample index of the p-th smallest pooled observation.
double ad_statistic(const PooledAD& pool, const std::vector<std::uint32_t>& labels) {
  const std::size_t k = pool.sizes.size();
  const double N = static_cast<double>(pool.total);
  std::vector<double> cum(k, 0.0), f(k, 0.0), acc(k, 0.0);
  double B = 0.0;
  std::size_t pos = 0;
  for (std::size_t l : pool.run_length) {
    std::fill(f.begin(), f.end(), 0.0);
    for (std::size_t t = 0; t < l; ++t) f[labels[pos++]] += 1.0;
    const double lj = static_cast<double>(l);
    const double Baj = B + lj / 2.0;
    const double denom = Baj * (N - Baj) - N * lj / 4.0;
    if (denom > 0.0) {
      for (std::size_t i = 0; i < k; ++i) {
        const double Maij = cum[i] + f[i] / 2.0;
        const double d = N * Maij - static_cast<double>(pool.sizes[i]) * Baj;
        acc[i] += lj / N * d * d / denom;
      }
    }
    for (std::size_t i = 0; i < k; ++i) cum[i] += f[i];
    B += lj;
  }
  double A = 0.0;
  for (std::size_t i = 0; i < k; ++i) A += acc[i] / static_cast<double>(pool.sizes[i]);
  return (N - 1.0) / N * A;
}

PooledAD pool_samples(const std::vector<std::vector<double>>& samples, std::vector<std::uint32_t>& labels) {
  if (samples.size() < 2) throw DomainError("Anderson-Darling needs at least 2 samples");
  PooledAD pool;
  std::vector<std::pair<double, std::uint32_t>> all;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() < 2) throw DomainError("each Anderson-Darling sample needs at least 2 values");
    pool.sizes.push_back(samples[i].size());
    for (double v : samples[i]) all.emplace_back(v, static_cast<std::uint32_t>(i));
  }
  std::sort(all.begin(), all.end());
  pool.total = all.size();
  labels.resize(all.size());
  for (std::size_t p = 0; p < all.size();) {
    std::size_t q = p;
    while (q < all.size() && all[q].first == all[p].first) {
      labels[q] = all[q].second;
      ++q;
    }
    pool.run_length.push_back(q - p);
    p = q;
  }
  if (pool.run_length.size() < 2) throw DegenerateError("all Anderson-Darling values are identical");
  return pool;
}

}  // namespace

double anderson_darling_statistic(const std::vector<std::vector<double>>& samples) {
  std::vector<std::uint32_t> labels;
  const auto pool = pool_samples(samples, labels);
  return ad_statistic(pool, labels);
}

AndersonDarlingResult anderson_darling_k(const std::vector<std::vector<double>>& samples, int simulations,
                                         std::uint64_t seed) {
  if (simulations < 1) throw DomainError("simulations must be positive");
  std::vector<std::uint32_t> labels;
  const auto pool = pool_samples(samples, labels);
  AndersonDarlingResult out;
  out.statistic = ad_statistic(pool, labels);
  out.simulations = simulations;
  std::vector<char> exceed(static_cast<std::size_t>(simulations), 0);
  const double tol = 1e-12 * std::max(1.0, std::fabs(out.statistic));
  parallel_for(exceed.size(), [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(seed, r));
    auto permuted = labels;
    shuffle_in_place(permuted, rng);
    exceed[r] = ad_statistic(pool, permuted) >= out.statistic - tol;
  });
  const auto count = static_cast<double>(std::count(exceed.begin(), exceed.end(), 1));
  out.p_value = (1.0 + count) / (static_cast<double>(simulations) + 1.0);
  return out;
}

std::vector<LoessPoint> loess(std::span<const double> x, std::span<const double> y, double span) {
  if (x.size() != y.size()) throw DomainError("loess needs equal-length samples");
  if (x.size() < 5) throw DomainError("loess needs at least 5 points");
  if (!(span > 0.0 && span <= 1.0)) throw DomainError("loess span must be in (0,1]");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  if (xs.front() == xs.back()) throw DegenerateError("loess needs at least two distinct x values");
  const std::size_t q = std::clamp<std::size_t>(ceil_fraction(span, n), 2, n);

  // Window of the q nearest neighbours of each point and its equivalent kernel.
  std::vector<std::size_t> window(n);
  for (std::size_t i = 0, lo = 0; i < n; ++i) {
    while (lo + q < n && xs[i] - xs[lo] > xs[lo + q] - xs[i]) ++lo;
    window[i] = lo;
  }
  std::vector<double> w(q), l(q);
  auto kernel = [&](std::size_t i) {
    const std::size_t lo = window[i];
    const double x0 = xs[i];
    const double h = std::max(x0 - xs[lo], xs[lo + q - 1] - x0);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double d = xs[lo + j] - x0;
      const double u = h > 0.0 ? std::fabs(d) / h : 0.0;
      w[j] = u < 1.0 ? std::pow(1.0 - u * u * u, 3) : 0.0;
      s0 += w[j];
      s1 += w[j] * d;
      s2 += w[j] * d * d;
    }
    const double det = s0 * s2 - s1 * s1;
    for (std::size_t j = 0; j < q; ++j) {
      const double d = xs[lo + j] - x0;
      l[j] = det > 1e-12 * s0 * s2 ? w[j] * (s2 - d * s1) / det : w[j] / s0;
    }
  };

  std::vector<double> fitted(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel(i);
    double fit = 0.0;
    for (std::size_t j = 0; j < q; ++j) fit += l[j] * ys[window[i] + j];
    fitted[i] = fit;
  }

  std::vector<LoessPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel(i);
    double sw = 0.0, sr = 0.0, sl = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const double r = ys[window[i] + j] - fitted[window[i] + j];
      sw += w[j];
      sr += w[j] * r * r;
      sl += l[j] * l[j];
    }
    const double half = 1.96 * std::sqrt(sr / sw) * std::sqrt(sl);
    out[i] = {xs[i], fitted[i], fitted[i] - half, fitted[i] + half};
  }
  return out;
}

}  // namespace coordnet
