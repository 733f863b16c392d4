#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace toolmeta::harness {

/// Best post-adaptation reward of one (variant, tool, seed) with the log
/// record it came from.
struct ResultRow {
  std::string variant;
  int tool_id = -1;
  std::uint64_t seed = 0;
  double best = 0.0;
  std::string source;      // metrics log path
  std::size_t record = 0;  // 1-based data record within that log

  bool operator==(const ResultRow&) const = default;
};

struct ResultSummary {
  std::string variant;
  int tool_id = -1;
  std::size_t seeds = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample std; NaN with fewer than two seeds

  bool has_std() const { return seeds >= 2; }
};

class ResultTable {
 public:
  void add(ResultRow row);
  const std::vector<ResultRow>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }

  /// Rows sorted by (variant, tool, seed).
  std::vector<ResultRow> sorted() const;
  /// Mean and sample standard deviation over seeds per (variant, tool),
  /// ordered by variant then tool.
  std::vector<ResultSummary> summarize() const;

  void write(const std::filesystem::path& path) const;
  static ResultTable read(const std::filesystem::path& path);

 private:
  std::vector<ResultRow> rows_;
};

void write_summary(const std::filesystem::path& path, const std::vector<ResultSummary>& s);

/// Evaluation reward after each adaptation iteration.
struct AdaptationCurve {
  std::string variant;
  int tool_id = -1;
  std::uint64_t seed = 0;
  std::vector<double> rewards;
};

void write_curves(const std::filesystem::path& path, const std::vector<AdaptationCurve>& curves);

struct Aggregate {
  ResultTable table;
  std::vector<AdaptationCurve> curves;  // sorted by (variant, tool, seed)
  std::vector<std::string> problems;    // missing or unreadable logs
};

/// Scans `<run>/<variant>/seed<k>/adapt_tool<id>.tsv` under each run
/// directory. Unreadable logs are listed in `problems` and skipped.
Aggregate aggregate(const std::vector<std::filesystem::path>& run_dirs);

/// Mean of the per-seed curves of one (variant, tool); shorter curves only
/// contribute to the iterations they cover.
std::vector<double> mean_curve(const std::vector<AdaptationCurve>& curves,
                               const std::string& variant, int tool_id);

}  // namespace toolmeta::harness
