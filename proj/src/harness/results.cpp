#include "toolmeta/harness/results.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <tuple>

#include "toolmeta/errors.hpp"
#include "toolmeta/rl/train.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::harness {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

std::string na(double v) { return std::isnan(v) ? "NA" : text::format_double(v); }

}  // namespace

void ResultTable::add(ResultRow row) { rows_.push_back(std::move(row)); }

std::vector<ResultRow> ResultTable::sorted() const {
  auto r = rows_;
  std::stable_sort(r.begin(), r.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.variant, a.tool_id, a.seed) < std::tie(b.variant, b.tool_id, b.seed);
  });
  return r;
}

std::vector<ResultSummary> ResultTable::summarize() const {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : rows_) groups[{r.variant, r.tool_id}].push_back(r.best);
  std::vector<ResultSummary> out;
  for (const auto& [key, v] : groups) {
    ResultSummary s;
    s.variant = key.first;
    s.tool_id = key.second;
    s.seeds = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    } else {
      s.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  return out;
}

void ResultTable::write(const fs::path& path) const {
  auto os = open_out(path);
  os << "variant\ttool_id\tseed\tbest\tsource\trecord\n";
  for (const auto& r : sorted())
    os << r.variant << '\t' << r.tool_id << '\t' << r.seed << '\t' << text::format_double(r.best)
       << '\t' << r.source << '\t' << r.record << '\n';
  if (!os) throw Error("failed writing " + path.string());
}

ResultTable ResultTable::read(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant\t", 0) != 0)
    throw FormatError(1, "missing result table header in " + path.string());
  ResultTable t;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    const auto f = text::split(line, '\t');
    if (f.size() != 6) throw FormatError(n, "expected 6 fields");
    try {
      t.add({std::string(f[0]), static_cast<int>(text::parse_int(f[1])),
             static_cast<std::uint64_t>(text::parse_int(f[2])), text::parse_double(f[3]),
             std::string(f[4]), static_cast<std::size_t>(text::parse_int(f[5]))});
    } catch (const std::invalid_argument& e) {
      throw FormatError(n, e.what());
    }
  }
  return t;
}

void write_summary(const fs::path& path, const std::vector<ResultSummary>& s) {
  auto os = open_out(path);
  os << "variant\ttool_id\tseeds\tmean\tstd\n";
  for (const auto& r : s)
    os << r.variant << '\t' << r.tool_id << '\t' << r.seeds << '\t' << na(r.mean) << '\t'
       << (r.has_std() ? na(r.stddev) : "NA") << '\n';
  if (!os) throw Error("failed writing " + path.string());
}

void write_curves(const fs::path& path, const std::vector<AdaptationCurve>& curves) {
  auto os = open_out(path);
  os << "variant\ttool_id\tseed\titeration\treward\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.rewards.size(); ++i)
      os << c.variant << '\t' << c.tool_id << '\t' << c.seed << '\t' << i + 1 << '\t'
         << na(c.rewards[i]) << '\n';
  if (!os) throw Error("failed writing " + path.string());
}

Aggregate aggregate(const std::vector<fs::path>& run_dirs) {
  static const std::regex seed_re("seed([0-9]+)");
  static const std::regex log_re("adapt_tool([0-9]+)\\.tsv");
  Aggregate out;
  for (const auto& run : run_dirs) {
    if (!fs::is_directory(run)) {
      out.problems.push_back(run.string() + ": not a directory");
      continue;
    }
    // Collect first so the visiting order does not depend on the directory
    // iteration order.
    std::vector<fs::path> logs;
    for (const auto& e : fs::recursive_directory_iterator(run)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && std::regex_match(name, m, log_re)) logs.push_back(e.path());
    }
    std::sort(logs.begin(), logs.end());
    if (logs.empty()) out.problems.push_back(run.string() + ": no adaptation logs");
    for (const auto& path : logs) {
      std::smatch m;
      const std::string seed_dir = path.parent_path().filename().string();
      const std::string name = path.filename().string();
      if (!std::regex_match(seed_dir, m, seed_re)) {
        out.problems.push_back(path.string() + ": not inside a seed<k> directory");
        continue;
      }
      const auto seed = static_cast<std::uint64_t>(std::stoull(m[1].str()));
      std::regex_match(name, m, log_re);
      const int tool = std::stoi(m[1].str());
      const std::string variant = path.parent_path().parent_path().filename().string();
      std::vector<rl::MetricsRecord> log;
      try {
        log = rl::read_metrics(path);
      } catch (const std::exception& e) {
        out.problems.push_back(path.string() + ": " + e.what());
        continue;
      }
      AdaptationCurve curve{variant, tool, seed, {}};
      ResultRow row{variant, tool, seed, -std::numeric_limits<double>::infinity(), path.string(), 0};
      for (std::size_t i = 0; i < log.size(); ++i) {
        if (log[i].phase != "adapt") continue;
        curve.rewards.push_back(log[i].eval_reward);
        if (log[i].eval_reward > row.best) {
          row.best = log[i].eval_reward;
          row.record = i + 1;
        }
      }
      if (curve.rewards.empty()) {
        out.problems.push_back(path.string() + ": no adapt records");
        continue;
      }
      out.table.add(row);
      out.curves.push_back(std::move(curve));
    }
  }
  std::stable_sort(out.curves.begin(), out.curves.end(),
                   [](const AdaptationCurve& a, const AdaptationCurve& b) {
                     return std::tie(a.variant, a.tool_id, a.seed) <
                            std::tie(b.variant, b.tool_id, b.seed);
                   });
  return out;
}

std::vector<double> mean_curve(const std::vector<AdaptationCurve>& curves,
                               const std::string& variant, int tool_id) {
  std::vector<double> sum;
  std::vector<int> count;
  for (const auto& c : curves) {
    if (c.variant != variant || c.tool_id != tool_id) continue;
    if (sum.size() < c.rewards.size()) {
      sum.resize(c.rewards.size(), 0.0);
      count.resize(c.rewards.size(), 0);
    }
    for (std::size_t i = 0; i < c.rewards.size(); ++i) {
      sum[i] += c.rewards[i];
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= count[i];
  return sum;
}

}  // namespace toolmeta::harness
