#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coordnet/network.hpp"

namespace coordnet {

struct EcdfPoint {
  double value = 0.0;
  double fraction = 0.0;  // share of the sample <= value
};

/// One point per distinct value, ascending.
std::vector<EcdfPoint> ecdf(std::vector<double> values);

struct Range {
  double low = 0.0;
  double high = 1.0;
};

/// Equal-width bins over a closed range; values on the upper edge fall into
/// the last bin, values outside the range are clamped into the end bins.
std::size_t bin_index(double v, Range range, std::size_t bins);

struct Histogram {
  Range range;
  std::size_t bins = 0;
  std::vector<std::size_t> counts;
};

Histogram histogram(std::span<const double> values, Range range, std::size_t bins);

struct Histogram2D {
  Range x_range, y_range;
  std::size_t bins = 0;
  std::vector<std::size_t> counts;  // row-major, x outer

  std::size_t at(std::size_t xi, std::size_t yi) const { return counts[xi * bins + yi]; }
  std::size_t total() const;
};

Histogram2D histogram2d(std::span<const double> x, std::span<const double> y, Range x_range, Range y_range,
                        std::size_t bins);

/// Similarity-weighted mean of the neighbours' attribute. Neighbours without
/// the attribute are ignored; nodes with no attributed neighbour are absent.
std::map<std::string, double> neighbor_weighted_mean(const WeightedNetwork& net,
                                                     const std::map<std::string, double>& attr);

/// Per-cluster min-max normalization of extremeness: leanings are oriented by
/// the sign of the cluster's mean leaning, then mapped so the least extreme
/// member of each cluster gets 0 and the most extreme 1. Clusters whose
/// members all share one value map to 0.
std::map<std::string, double> cluster_normalized_leaning(const std::map<std::string, double>& leaning,
                                                         const std::map<std::string, int>& cluster);

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Minimal self-contained line chart.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<SvgSeries>& series);

}  // namespace coordnet
