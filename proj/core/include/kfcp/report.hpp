#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfcp/evalharness.hpp"

namespace kfcp {

/// Fixed-width text table, one row per (scenario, method), 4 decimals.
std::string summary_table(const std::vector<AggregateSummary>& summaries);

enum class BoxMetric { coverage, log2_ratio };

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};

/// Tukey box statistics with interpolated quartiles; whiskers reach the most
/// extreme points within 1.5 IQR of the box.
struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double mean = 0.0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::span<const double> values);

/// Standalone SVG document: one box per group, a white mean marker, and a
/// dashed horizontal line at `nominal_line` when given. Throws EmptyGroup
/// if there are no groups or a group has no values.
std::string render_boxplot_svg(const std::vector<BoxGroup>& groups, BoxMetric metric,
                               std::optional<double> nominal_line, const std::string& title);

/// render_boxplot_svg written to `path`; throws IoError on failure.
void emit_boxplot_svg(const std::vector<BoxGroup>& groups, BoxMetric metric,
                      std::optional<double> nominal_line, const std::string& title,
                      const std::filesystem::path& path);

/// Coverage groups (one per method) for `scenario`, in method order.
std::vector<BoxGroup> coverage_groups(const std::vector<EvalRecord>& records,
                                      const std::string& scenario);

/// log2(SC / method) width-ratio groups for the non-SC methods of `scenario`.
std::vector<BoxGroup> ratio_groups(const std::vector<PairedRatio>& ratios,
                                   const std::string& scenario);

}  // namespace kfcp
