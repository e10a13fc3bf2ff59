#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coordnet/network.hpp"

namespace coordnet {

/// Type-7 (linear interpolation) quantile of an ascending sample.
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);

/// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Pearson correlation; DegenerateError when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct SpearmanResult {
  double rho = 0.0;
  Interval ci;
  int replicates = 0;  // resamples with nonzero rank variance
};

/// Spearman's rho with a 95% percentile-bootstrap CI over index resamples.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y, int replicates = 10000,
                        std::uint64_t seed = 0);

struct BootstrapSummary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<double> distribution;  // replicate means, in replicate order
};

BootstrapSummary bootstrap_mean(std::span<const double> values, int replicates = 50000, std::uint64_t seed = 0);

/// Numeric attribute assortativity: Pearson correlation of attr over edge
/// endpoints, each edge counted in both orientations. Edges with an endpoint
/// lacking attr are ignored. `weighted` weighs each edge by its weight.
double assortativity(const WeightedNetwork& net, const std::map<std::string, double>& attr, bool weighted = false);

struct ShuffleTest {
  double observed = 0.0;
  double z = 0.0;
  double null_mean = 0.0;
  double null_sd = 0.0;
};

/// Z-score of the observed assortativity against random permutations of the
/// attribute values among attributed nodes.
ShuffleTest shuffle_zscore(const WeightedNetwork& net, const std::map<std::string, double>& attr,
                           int shuffles = 10000, std::uint64_t seed = 0, bool weighted = false);

/// k-sample Anderson-Darling statistic (midrank version, valid with ties).
double anderson_darling_statistic(const std::vector<std::vector<double>>& samples);

struct AndersonDarlingResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int simulations = 0;
};

/// Permutation p-value (1 + #{sim >= observed}) / (simulations + 1).
AndersonDarlingResult anderson_darling_k(const std::vector<std::vector<double>>& samples, int simulations = 10000,
                                         std::uint64_t seed = 0);

struct LoessPoint {
  double x = 0.0;
  double fitted = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Local linear regression with tricube weights over the ceil(span * n)
/// nearest points. One row per input point, ascending in x; 95% bands use
/// the weighted residual variance of each neighbourhood.
std::vector<LoessPoint> loess(std::span<const double> x, std::span<const double> y, double span = 0.75);

}  // namespace coordnet
