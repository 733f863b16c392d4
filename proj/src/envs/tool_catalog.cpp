#include "toolmeta/envs/tool_catalog.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numbers>
#include <random>

#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::envs {
namespace {

constexpr double kPi = std::numbers::pi;

// Parameter ranges of the geometry space: handle length, handle width,
// head length, head width, head angle, grasp ratio.
constexpr std::array<double, 6> kLow = {0.08, 0.010, 0.02, 0.010, -kPi / 2, 0.0};
constexpr std::array<double, 6> kHigh = {0.32, 0.050, 0.16, 0.070, kPi / 2, 1.0};

constexpr double kDensity = 2.0;  // kg per m^2 of footprint (thin plates)

struct Family {
  const char* key;
  std::array<const char*, 3> train_names;
  const char* test_name;
  std::array<double, 6> base;  // physical units, grasp as ratio
};

// Family bases are spread over the parameter box; members are drawn around them.
const std::array<Family, 9> kFamilies = {{
    {"hammer", {"mallet", "sledgehammer", "meat tenderizer"}, "hammer",
     {0.22, 0.025, 0.10, 0.040, 0.0, 0.15}},
    {"crowbar", {"cane", "hockey stick", "ice pick"}, "crowbar",
     {0.29, 0.018, 0.06, 0.020, 1.05, 0.50}},
    {"trowel", {"spatula", "putty knife", "shovel"}, "trowel",
     {0.12, 0.030, 0.09, 0.065, 1.45, 0.30}},
    {"roller", {"squeegee", "rake", "broom"}, "paint roller",
     {0.20, 0.015, 0.145, 0.030, -0.35, 0.10}},
    {"pliers", {"wrench", "tongs", "nutcracker"}, "pliers",
     {0.15, 0.042, 0.040, 0.025, 0.60, 0.45}},
    {"scissors", {"knife", "screwdriver", "chisel"}, "scissors",
     {0.10, 0.040, 0.125, 0.015, -1.30, 0.20}},
    {"faucet", {"pipe elbow", "tap handle", "valve key"}, "faucet",
     {0.09, 0.028, 0.120, 0.035, -0.80, 0.80}},
    {"glass", {"cup", "bottle", "candle holder"}, "wine glass",
     {0.11, 0.013, 0.070, 0.058, 0.10, 0.65}},
    {"axe", {"hatchet", "pickaxe", "adze"}, "axe",
     {0.27, 0.032, 0.125, 0.052, 0.35, 0.85}},
}};

constexpr double kTrainJitter = 0.035;  // normalized, per coordinate
constexpr double kTestOffset = 0.16;    // normalized, euclidean

std::array<double, 6> to_unit(const std::array<double, 6>& phys) {
  std::array<double, 6> u{};
  for (int i = 0; i < 6; ++i) u[i] = (phys[i] - kLow[i]) / (kHigh[i] - kLow[i]);
  return u;
}

ToolSpec from_unit(const std::array<double, 6>& unit) {
  std::array<double, 6> p{};
  for (int i = 0; i < 6; ++i) {
    // Keep strictly inside the box so lengths stay positive.
    const double u = std::clamp(unit[i], 0.02, 0.98);
    p[i] = kLow[i] + u * (kHigh[i] - kLow[i]);
  }
  ToolSpec t;
  t.handle_length = p[0];
  t.handle_width = p[1];
  t.head_length = p[2];
  t.head_width = p[3];
  t.head_angle = p[4];
  t.grasp_offset = p[5] * p[0];
  t.mass = kDensity * (t.handle_length * t.handle_width + t.head_length * t.head_width);
  return t;
}

}  // namespace

Box ToolSpec::handle_box() const {
  return Box{{handle_length / 2, 0.0}, 0.0, handle_length / 2, handle_width / 2};
}

Box ToolSpec::head_box() const {
  return Box{{handle_length + head_width / 2, 0.0}, kPi / 2 + head_angle, head_length / 2,
             head_width / 2};
}

Vec2 ToolSpec::centroid() const {
  const Box h = handle_box(), k = head_box();
  const double a = h.area(), b = k.area();
  return (h.center * a + k.center * b) * (1.0 / (a + b));
}

void ToolSpec::validate() const {
  if (!(handle_length > 0 && handle_width > 0 && head_length > 0 && head_width > 0))
    throw Error("tool " + std::to_string(id) + ": lengths must be positive");
  if (!(head_angle >= -kPi / 2 && head_angle <= kPi / 2))
    throw Error("tool " + std::to_string(id) + ": head_angle outside [-pi/2, pi/2]");
  if (!(grasp_offset >= 0 && grasp_offset <= handle_length))
    throw Error("tool " + std::to_string(id) + ": grasp_offset outside the handle");
}

std::vector<double> geometry_features(const ToolSpec& t) {
  const std::array<double, 6> phys = {t.handle_length, t.handle_width, t.head_length,
                                      t.head_width,    t.head_angle,   t.grasp_offset /
                                                                           t.handle_length};
  const auto u = to_unit(phys);
  return {u.begin(), u.end()};
}

double geometry_distance(const ToolSpec& a, const ToolSpec& b) {
  const auto fa = geometry_features(a), fb = geometry_features(b);
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return std::sqrt(s);
}

std::vector<ToolSpec> generate_catalog(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-kTrainJitter, kTrainJitter);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<ToolSpec> catalog;
  catalog.reserve(kCatalogSize);
  for (const auto& fam : kFamilies) {
    const auto base = to_unit(fam.base);
    for (int member = 0; member < 4; ++member) {
      std::array<double, 6> u = base;
      if (member < 3) {
        for (auto& v : u) v += jitter(rng);
      } else {
        // Held-out variant: a fixed-length step in a random direction.
        std::array<double, 6> dir{};
        double norm = 0.0;
        for (auto& d : dir) {
          d = gauss(rng);
          norm += d * d;
        }
        norm = std::sqrt(norm);
        for (int i = 0; i < 6; ++i) u[i] += kTestOffset * dir[i] / norm;
        // Reflect back inside the box rather than clamping onto the family.
        for (auto& v : u) {
          if (v < 0.02) v = 0.04 - v;
          if (v > 0.98) v = 1.96 - v;
        }
      }
      ToolSpec t = from_unit(u);
      t.id = static_cast<int>(catalog.size());
      t.family = fam.key;
      t.name = member < 3 ? fam.train_names[member] : fam.test_name;
      t.split = member < 3 ? Split::train : Split::test;
      t.validate();
      catalog.push_back(std::move(t));
    }
  }
  return catalog;
}

std::vector<ToolSpec> tools_in_split(const std::vector<ToolSpec>& catalog, Split split) {
  std::vector<ToolSpec> out;
  std::copy_if(catalog.begin(), catalog.end(), std::back_inserter(out),
               [&](const ToolSpec& t) { return t.split == split; });
  return out;
}

const ToolSpec& find_tool(const std::vector<ToolSpec>& catalog, int id) {
  for (const auto& t : catalog)
    if (t.id == id) return t;
  throw Error("unknown tool id " + std::to_string(id));
}

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

namespace {
constexpr const char* kCatalogHeader = "# toolmeta-tools v1";
constexpr const char* kCatalogColumns =
    "id\tname\tfamily\thandle_length\thandle_width\thead_length\thead_width\thead_angle\t"
    "grasp_offset\tmass\tsplit";
}  // namespace

void write_catalog(const std::filesystem::path& path, const std::vector<ToolSpec>& catalog) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write catalog: " + path.string());
  os << kCatalogHeader << '\n' << kCatalogColumns << '\n';
  using text::format_double;
  for (const auto& t : catalog) {
    os << t.id << '\t' << t.name << '\t' << t.family << '\t' << format_double(t.handle_length)
       << '\t' << format_double(t.handle_width) << '\t' << format_double(t.head_length) << '\t'
       << format_double(t.head_width) << '\t' << format_double(t.head_angle) << '\t'
       << format_double(t.grasp_offset) << '\t' << format_double(t.mass) << '\t'
       << to_string(t.split) << '\n';
  }
}

std::vector<ToolSpec> read_catalog(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read catalog: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line) || text::trim(line) != kCatalogHeader)
    throw FormatError(1, "missing '" + std::string(kCatalogHeader) + "' header");
  ++lineno;
  std::vector<ToolSpec> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty() || line.rfind("id\t", 0) == 0 || line[0] == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 11) throw FormatError(lineno, "expected 11 fields, found " + std::to_string(f.size()));
    try {
      ToolSpec t;
      t.id = static_cast<int>(text::parse_int(f[0]));
      t.name = f[1];
      t.family = f[2];
      t.handle_length = text::parse_double(f[3]);
      t.handle_width = text::parse_double(f[4]);
      t.head_length = text::parse_double(f[5]);
      t.head_width = text::parse_double(f[6]);
      t.head_angle = text::parse_double(f[7]);
      t.grasp_offset = text::parse_double(f[8]);
      t.mass = text::parse_double(f[9]);
      if (f[10] == "train") t.split = Split::train;
      else if (f[10] == "test") t.split = Split::test;
      else throw std::invalid_argument("bad split '" + std::string(f[10]) + "'");
      t.validate();
      out.push_back(std::move(t));
    } catch (const std::invalid_argument& e) {
      throw FormatError(lineno, e.what());
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace toolmeta::envs
