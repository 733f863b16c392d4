#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toolmeta/harness/results.hpp"

namespace toolmeta::harness {

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// [min - m * span, max + m * span]; a zero span widens to +-m * max(|v|, 1).
AxisRange padded_range(double min, double max, double margin = 0.05);

struct Chart {
  AxisRange x;
  AxisRange y;
  std::string svg;
};

/// Grouped bars: one group per tool, one bar per variant, with a +-std
/// whisker where at least two seeds contributed. Bars start at zero, so the
/// y range spans zero as well as every mean +- std. Throws Error when empty.
Chart bar_chart(const std::vector<ResultSummary>& summaries, const std::string& title);

struct CurveSeries {
  std::string label;
  std::vector<double> y;  // y[i] is plotted at x = i + 1
};

/// Line chart of reward against adaptation iteration. Throws Error when
/// there is no point to draw.
Chart line_chart(const std::vector<CurveSeries>& series, const std::string& title,
                 const std::string& x_label = "adaptation iteration",
                 const std::string& y_label = "reward");

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace toolmeta::harness
