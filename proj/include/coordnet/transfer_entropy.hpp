#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coordnet/ingest.hpp"
#include "coordnet/sequences.hpp"

namespace coordnet {

struct HourlySeries {
  Timestamp start_hour{};
  std::vector<std::optional<double>> values;
  std::vector<std::size_t> counts;
};

/// Mean value per hour over the half-open window [start, end); both bounds
/// must be hour-aligned. Points outside the window are ignored.
HourlySeries hourly_series(std::span<const TimedValue> points, Timestamp start, Timestamp end);

/// Hour-aligned window covering every point: [floor(min), floor(max) + 1h).
std::pair<Timestamp, Timestamp> hour_window(std::span<const TimedValue> points);

/// Type-7 quantiles of `values` at `probs` (strictly increasing in (0,1)).
std::vector<double> quantile_bounds(std::span<const double> values, std::span<const double> probs);

/// Symbol of v = number of bounds strictly below v.
std::vector<int> quantile_bins(std::span<const double> values, std::span<const double> probs);

using SymbolSeries = std::vector<std::optional<int>>;

/// Symbolizes the present hours of a series against its own quantiles.
SymbolSeries symbolize(const HourlySeries& series, std::span<const double> probs);

struct TeEstimate {
  double te = 0.0;
  std::size_t n_transitions = 0;
};

inline constexpr std::size_t kMinTransitions = 25;

/// Renyi transfer entropy T_q(X -> Y) in bits, escort-distribution form:
///   1/(1-q) log2( sum phi_q(y_t) p^q(y_{t+1}|y_t) / sum phi_q(y_t,x_t) p^q(y_{t+1}|y_t,x_t) )
/// with histories of length `history` for both series. Only transitions whose
/// every index is present in both series are used.
TeEstimate renyi_te(const SymbolSeries& x, const SymbolSeries& y, double q = 0.5, int history = 1);

struct TeTest {
  TeEstimate estimate;
  double p_value = 1.0;
  int bootstraps = 0;
};

/// Significance against Markov-bootstrapped sources: the source is replaced by
/// a chain of order `history` drawn from its own empirical transitions (its
/// missing hours kept), and p = (1 + #{boot >= observed}) / (bootstraps + 1).
TeTest te_significance(const SymbolSeries& x, const SymbolSeries& y, double q = 0.5, int history = 1,
                       int bootstraps = 300, std::uint64_t seed = 0);

/// Export `hour,mean_toxicity,count`.
void write_hourly_series(const HourlySeries& series, const std::filesystem::path& path);

struct TeRow {
  std::string direction;
  double q = 0.5;
  int history = 1;
  std::optional<TeTest> test;  // absent when the estimate is undefined
};

/// Export `direction,q,history,te,p_value,n_transitions`; undefined
/// estimates leave the last three fields empty.
void write_te_summary(std::span<const TeRow> rows, const std::filesystem::path& path);

}  // namespace coordnet
