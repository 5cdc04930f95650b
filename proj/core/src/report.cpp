#include "kfcp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "kfcp/error.hpp"
#include "kfcp/stats.hpp"

namespace kfcp {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.0000" || s == "-0.00" || s == "-0.000") s.erase(0, 1);
  return s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string summary_table(const std::vector<AggregateSummary>& summaries) {
  const std::vector<std::string> header{"scenario", "method", "reps", "mean_coverage",
                                        "mean_width", "mean_log2_ratio"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(summaries.size());
  for (const auto& s : summaries) {
    rows.push_back({s.scenario, s.method.name(), std::to_string(s.replicates),
                    fixed(s.mean_coverage, 4), fixed(s.mean_width, 4),
                    s.mean_log2_ratio ? fixed(*s.mean_log2_ratio, 4) : std::string("-")});
  }
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& r : rows) widths[c] = std::max(widths[c], r[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) out << "  ";
      out << (c < 2 ? pad_right(r[c], widths[c]) : pad_left(r[c], widths[c]));
    }
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return out.str();
}

BoxStats box_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyGroup, "box statistics of an empty group");
  BoxStats b;
  const Quartiles q = quartiles(values);
  b.q1 = q.q1;
  b.median = q.median;
  b.q3 = q.q3;
  b.mean = mean(values);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  return b;
}

std::string render_boxplot_svg(const std::vector<BoxGroup>& groups, BoxMetric metric,
                               std::optional<double> nominal_line, const std::string& title) {
  if (groups.empty()) throw Error(ErrorCode::EmptyGroup, "no groups to plot");
  std::vector<BoxStats> stats;
  for (const auto& g : groups) {
    if (g.values.empty()) throw Error(ErrorCode::EmptyGroup, "group '" + g.label + "' is empty");
    stats.push_back(box_stats(g.values));
  }

  double lo = stats.front().whisker_low;
  double hi = stats.front().whisker_high;
  for (const auto& s : stats) {
    lo = std::min({lo, s.whisker_low, s.mean});
    hi = std::max({hi, s.whisker_high, s.mean});
    for (double o : s.outliers) {
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
  }
  if (nominal_line) {
    lo = std::min(lo, *nominal_line);
    hi = std::max(hi, *nominal_line);
  }
  if (hi - lo < 1e-9) {
    const double pad = std::max(std::abs(hi) * 0.05, 0.01);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }

  constexpr double kLeft = 70.0;
  constexpr double kTop = 40.0;
  constexpr double kPlotHeight = 260.0;
  constexpr double kSlot = 90.0;
  constexpr double kBoxHalf = 22.0;
  const double plot_width = kSlot * static_cast<double>(groups.size());
  const double width = kLeft + plot_width + 20.0;
  const double height = kTop + kPlotHeight + 50.0;
  auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * kPlotHeight; };
  auto num = [](double v) { return fixed(v, 2); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";

  svg << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double y = y_of(v);
    svg << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + plot_width)
        << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 3) << "\" text-anchor=\"end\">"
        << fixed(v, 3) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"14\" y=\"" << num(kTop + kPlotHeight / 2) << "\" font-family=\"sans-serif\" font-size=\"11\" "
      << "transform=\"rotate(-90 14 " << num(kTop + kPlotHeight / 2) << ")\" text-anchor=\"middle\">"
      << (metric == BoxMetric::coverage ? "coverage rate" : "log2(width SC / width method)")
      << "</text>\n";

  for (std::size_t i = 0; i < groups.size(); ++i) {
    const BoxStats& s = stats[i];
    const double cx = kLeft + kSlot * (static_cast<double>(i) + 0.5);
    const double x0 = cx - kBoxHalf;
    const double x1 = cx + kBoxHalf;
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(s.whisker_high)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(y_of(s.q3)) << "\"/>\n"
        << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(s.q1)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(y_of(s.whisker_low)) << "\"/>\n"
        << "<line x1=\"" << num(cx - 10) << "\" y1=\"" << num(y_of(s.whisker_high)) << "\" x2=\""
        << num(cx + 10) << "\" y2=\"" << num(y_of(s.whisker_high)) << "\"/>\n"
        << "<line x1=\"" << num(cx - 10) << "\" y1=\"" << num(y_of(s.whisker_low)) << "\" x2=\""
        << num(cx + 10) << "\" y2=\"" << num(y_of(s.whisker_low)) << "\"/>\n"
        << "<rect x=\"" << num(x0) << "\" y=\"" << num(y_of(s.q3)) << "\" width=\"" << num(x1 - x0)
        << "\" height=\"" << num(y_of(s.q1) - y_of(s.q3)) << "\" fill=\"#9ecae1\"/>\n"
        << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y_of(s.median)) << "\" x2=\"" << num(x1)
        << "\" y2=\"" << num(y_of(s.median)) << "\" stroke-width=\"2\"/>\n";
    for (double o : s.outliers) {
      svg << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(y_of(o)) << "\" r=\"2\" fill=\"none\"/>\n";
    }
    svg << "<circle class=\"mean\" cx=\"" << num(cx) << "\" cy=\"" << num(y_of(s.mean))
        << "\" r=\"4\" fill=\"white\"/>\n"
        << "</g>\n"
        << "<text x=\"" << num(cx) << "\" y=\"" << num(kTop + kPlotHeight + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << xml_escape(groups[i].label) << "</text>\n";
  }

  if (nominal_line) {
    const double y = y_of(*nominal_line);
    svg << "<path class=\"nominal\" d=\"M " << num(kLeft) << ' ' << num(y) << " H "
        << num(kLeft + plot_width) << "\" stroke=\"red\" stroke-dasharray=\"6,4\" fill=\"none\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_boxplot_svg(const std::vector<BoxGroup>& groups, BoxMetric metric,
                      std::optional<double> nominal_line, const std::string& title,
                      const std::filesystem::path& path) {
  const std::string doc = render_boxplot_svg(groups, metric, nominal_line, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<BoxGroup> coverage_groups(const std::vector<EvalRecord>& records,
                                      const std::string& scenario) {
  std::map<Method, std::vector<std::pair<std::size_t, double>>> by_method;
  for (const auto& r : records) {
    if (r.scenario == scenario) by_method[r.method].emplace_back(r.replicate, r.coverage);
  }
  std::vector<BoxGroup> groups;
  for (auto& [method, values] : by_method) {
    std::sort(values.begin(), values.end());
    BoxGroup g{method.name(), {}};
    for (const auto& v : values) g.values.push_back(v.second);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<BoxGroup> ratio_groups(const std::vector<PairedRatio>& ratios,
                                   const std::string& scenario) {
  std::map<Method, std::vector<std::pair<std::size_t, double>>> by_method;
  for (const auto& r : ratios) {
    if (r.scenario == scenario && r.method.kind != Method::Kind::split) {
      by_method[r.method].emplace_back(r.replicate, r.log2_ratio);
    }
  }
  std::vector<BoxGroup> groups;
  for (auto& [method, values] : by_method) {
    std::sort(values.begin(), values.end());
    BoxGroup g{method.name(), {}};
    for (const auto& v : values) g.values.push_back(v.second);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace kfcp
