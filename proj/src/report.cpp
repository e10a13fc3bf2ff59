#include "coordnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coordnet/csv.hpp"
#include "coordnet/error.hpp"

namespace coordnet {

std::vector<EcdfPoint> ecdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (i + 1 == values.size() || values[i + 1] != values[i])
      out.push_back({values[i], static_cast<double>(i + 1) / n});
  return out;
}

std::size_t bin_index(double v, Range range, std::size_t bins) {
  if (bins == 0 || !(range.high > range.low)) throw DomainError("invalid histogram binning");
  const double t = (v - range.low) / (range.high - range.low) * static_cast<double>(bins);
  if (!(t > 0.0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(t));
}

Histogram histogram(std::span<const double> values, Range range, std::size_t bins) {
  Histogram h{range, bins, std::vector<std::size_t>(bins, 0)};
  for (double v : values) ++h.counts[bin_index(v, range, bins)];
  return h;
}

std::size_t Histogram2D::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram2D histogram2d(std::span<const double> x, std::span<const double> y, Range x_range, Range y_range,
                        std::size_t bins) {
  if (x.size() != y.size()) throw DomainError("histogram2d needs paired samples");
  Histogram2D h{x_range, y_range, bins, std::vector<std::size_t>(bins * bins, 0)};
  for (std::size_t i = 0; i < x.size(); ++i)
    ++h.counts[bin_index(x[i], x_range, bins) * bins + bin_index(y[i], y_range, bins)];
  return h;
}

std::map<std::string, double> neighbor_weighted_mean(const WeightedNetwork& net,
                                                     const std::map<std::string, double>& attr) {
  std::vector<const double*> value(net.node_count(), nullptr);
  for (NodeId i = 0; i < net.node_count(); ++i) {
    auto it = attr.find(net.name(i));
    if (it != attr.end()) value[i] = &it->second;
  }
  std::map<std::string, double> out;
  for (NodeId i = 0; i < net.node_count(); ++i) {
    double num = 0.0, den = 0.0;
    for (const auto& nb : net.neighbors(i)) {
      if (!value[nb.node]) continue;
      const double w = net.edges()[nb.edge].weight;
      num += w * *value[nb.node];
      den += w;
    }
    if (den > 0.0) out.emplace(net.name(i), num / den);
  }
  return out;
}

std::map<std::string, double> cluster_normalized_leaning(const std::map<std::string, double>& leaning,
                                                         const std::map<std::string, int>& cluster) {
  std::map<int, std::vector<std::pair<std::string, double>>> members;
  for (const auto& [user, c] : cluster) {
    auto it = leaning.find(user);
    if (it != leaning.end()) members[c].emplace_back(user, it->second);
  }
  std::map<std::string, double> out;
  for (const auto& [c, list] : members) {
    double sum = 0.0;
    for (const auto& [_, l] : list) sum += l;
    const double orient = sum < 0.0 ? -1.0 : 1.0;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& [_, l] : list) {
      lo = std::min(lo, orient * l);
      hi = std::max(hi, orient * l);
    }
    for (const auto& [user, l] : list) out.emplace(user, hi > lo ? (orient * l - lo) / (hi - lo) : 0.0);
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<SvgSeries>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  ss << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
     << "</text>\n";
  ss << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  ss << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  ss << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xml_escape(x_label) << "</text>\n";
  ss << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    ss << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << csv::format_double(std::round(xv * 1000) / 1000) << "</text>\n";
    ss << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
       << csv::format_double(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    ss << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      ss << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    }
    ss << "\"/>\n";
    ss << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (s + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
       << color << "\">" << xml_escape(series[s].label) << "</text>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace coordnet
