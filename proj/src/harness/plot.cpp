#include "toolmeta/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "toolmeta/errors.hpp"

namespace toolmeta::harness {
namespace {

constexpr double kWidth = 820, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 44, kBottom = 56;
constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                    "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string escape(const std::string& s) {
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

struct Frame {
  AxisRange x, y;
  double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

std::string header(const std::string& title) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
}

/// Axes, y ticks and the y label.
std::string axes(const Frame& f, const std::string& y_label) {
  std::string s = fmt::format(
      "<g stroke=\"black\" stroke-width=\"1\">"
      "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>"
      "<line x1=\"{0:.2f}\" y1=\"{2:.2f}\" x2=\"{3:.2f}\" y2=\"{2:.2f}\"/></g>\n",
      kLeft, kTop, kHeight - kBottom, kWidth - kRight);
  for (int i = 0; i <= 5; ++i) {
    const double v = f.y.lo + (f.y.hi - f.y.lo) * i / 5.0;
    s += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#dddddd\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.3g}</text>\n",
        kLeft, f.py(v), kWidth - kRight, kLeft - 6, f.py(v) + 4, v);
  }
  s += fmt::format(
      "<text x=\"18\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.2f})\">{1}</text>\n",
      (kTop + kHeight - kBottom) / 2, escape(y_label));
  return s;
}

std::string legend(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 8 + 20.0 * static_cast<double>(i);
    s += fmt::format(
        "<rect x=\"{0:.2f}\" y=\"{1:.2f}\" width=\"12\" height=\"12\" fill=\"{2}\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\">{5}</text>\n",
        kWidth - kRight + 14, y, kPalette[i % std::size(kPalette)], kWidth - kRight + 32, y + 10,
        escape(labels[i]));
  }
  return s;
}

}  // namespace

AxisRange padded_range(double min, double max, double margin) {
  if (!(min <= max)) throw Error("axis range needs finite min <= max");
  const double span = max - min;
  if (span > 0.0) return {min - margin * span, max + margin * span};
  const double pad = margin * std::max(std::abs(max), 1.0);
  return {min - pad, max + pad};
}

Chart bar_chart(const std::vector<ResultSummary>& summaries, const std::string& title) {
  if (summaries.empty()) throw Error("bar chart needs at least one result");
  std::vector<std::string> variants;
  std::vector<int> tools;
  double lo = 0.0, hi = 0.0;
  for (const auto& s : summaries) {
    if (std::find(variants.begin(), variants.end(), s.variant) == variants.end())
      variants.push_back(s.variant);
    if (std::find(tools.begin(), tools.end(), s.tool_id) == tools.end()) tools.push_back(s.tool_id);
    const double e = s.has_std() ? s.stddev : 0.0;
    lo = std::min(lo, s.mean - e);
    hi = std::max(hi, s.mean + e);
  }
  std::sort(tools.begin(), tools.end());

  Chart c;
  c.x = {0.0, static_cast<double>(tools.size())};
  c.y = padded_range(lo, hi);
  const Frame f{c.x, c.y};
  std::string s = header(title) + axes(f, "best post-adaptation reward");
  const double group = f.px(1.0) - f.px(0.0);
  const double bar = group * 0.8 / static_cast<double>(variants.size());
  for (const auto& r : summaries) {
    const auto ti = static_cast<double>(std::find(tools.begin(), tools.end(), r.tool_id) - tools.begin());
    const auto vi = static_cast<std::size_t>(std::find(variants.begin(), variants.end(), r.variant) -
                                             variants.begin());
    const double x = f.px(ti) + group * 0.1 + bar * static_cast<double>(vi);
    const double y0 = f.py(0.0), y1 = f.py(r.mean);
    s += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", x,
        std::min(y0, y1), bar * 0.92, std::abs(y1 - y0), kPalette[vi % std::size(kPalette)]);
    if (r.has_std()) {
      const double cx = x + bar * 0.46;
      s += fmt::format(
          "<g stroke=\"black\"><line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>"
          "<line x1=\"{3:.2f}\" y1=\"{1:.2f}\" x2=\"{4:.2f}\" y2=\"{1:.2f}\"/>"
          "<line x1=\"{3:.2f}\" y1=\"{2:.2f}\" x2=\"{4:.2f}\" y2=\"{2:.2f}\"/></g>\n",
          cx, f.py(r.mean - r.stddev), f.py(r.mean + r.stddev), cx - 4, cx + 4);
    }
  }
  for (std::size_t i = 0; i < tools.size(); ++i)
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">tool {}</text>\n",
                     f.px(static_cast<double>(i) + 0.5), kHeight - kBottom + 18, tools[i]);
  s += legend(variants) + "</svg>\n";
  c.svg = std::move(s);
  return c;
}

Chart line_chart(const std::vector<CurveSeries>& series, const std::string& title,
                 const std::string& x_label, const std::string& y_label) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& cs : series)
    for (double v : cs.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        n = std::max(n, cs.y.size());
      }
  if (n == 0) throw Error("line chart needs at least one finite point");
  Chart c;
  c.x = padded_range(1.0, static_cast<double>(n));
  c.y = padded_range(lo, hi);
  const Frame f{c.x, c.y};
  std::string s = header(title) + axes(f, y_label);
  for (std::size_t i = 1; i <= n; ++i)
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                     f.px(static_cast<double>(i)), kHeight - kBottom + 18, i);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                   (kLeft + kWidth - kRight) / 2, kHeight - 14, escape(x_label));
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    labels.push_back(series[k].label);
    std::string pts;
    for (std::size_t i = 0; i < series[k].y.size(); ++i)
      if (std::isfinite(series[k].y[i]))
        pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ",
                           f.px(static_cast<double>(i + 1)), f.py(series[k].y[i]));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
                     kPalette[k % std::size(kPalette)], pts);
  }
  s += legend(labels) + "</svg>\n";
  c.svg = std::move(s);
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw Error("cannot write " + path.string());
}

}  // namespace toolmeta::harness
