#include "toolmeta/language/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::lang {
namespace {

struct FamilyText {
  const char* key;
  const char* silhouette;  // "a T", "a hook", ...
  std::vector<const char*> uses;
  std::vector<const char*> purposes;
};

const std::vector<FamilyText> kFamilyText = {
    {"hammer", "a T",
     {"driving nails into wood", "knocking parts into place", "flattening dents in metal",
      "tapping pegs and stakes"},
     {"delivering a sharp downward impact", "concentrating force on a small spot",
      "striking an object with a heavy head"}},
    {"crowbar", "a shepherd's crook",
     {"prying boards apart", "pulling objects closer with the curved end",
      "levering heavy lids open", "reaching under furniture"},
     {"hooking and dragging objects", "turning a small push into a large lever force",
      "reaching around obstacles"}},
    {"trowel", "a flat paddle",
     {"spreading mortar", "scooping soil", "smoothing plaster over a wall",
      "lifting small amounts of material"},
     {"spreading and scraping with a broad blade", "moving loose material across a surface",
      "pressing a flat face against a surface"}},
    {"roller", "a wide T with a long bar",
     {"painting walls", "sweeping water off the floor", "gathering leaves",
      "pushing debris into a pile"},
     {"sweeping a wide strip in one pass", "pushing many small things at once",
      "covering a broad area with a long edge"}},
    {"pliers", "a short stubby fork",
     {"gripping small parts", "twisting wire", "cracking shells", "turning bolts"},
     {"holding things firmly with short jaws", "applying strong force close to the hand",
      "clamping and turning small objects"}},
    {"scissors", "a narrow blade",
     {"cutting paper", "slicing string", "prying small gaps open", "poking through material"},
     {"working with a thin narrow edge", "reaching into tight spaces",
      "cutting along a precise line"}},
    {"faucet", "a bent pipe",
     {"pouring water", "turning a valve", "directing a stream into a basin",
      "connecting two pipes at an angle"},
     {"redirecting flow around a corner", "turning with a short angled arm",
      "reaching sideways from a fixed stem"}},
    {"glass", "a goblet",
     {"holding drinks", "serving wine", "carrying liquid", "standing upright on a table"},
     {"holding liquid in a wide bowl", "being lifted by a slim stem",
      "resting on a flat base"}},
    {"axe", "a heavy wedge on a pole",
     {"chopping wood", "splitting logs", "felling small trees", "clearing branches"},
     {"swinging a heavy head with long reach", "driving a sharp edge with momentum",
      "striking hard at the end of a long handle"}},
};

const FamilyText& family_text(const std::string& key) {
  for (const auto& f : kFamilyText)
    if (key == f.key) return f;
  throw Error("no description templates for tool family '" + key + "'");
}

struct Words {
  std::string handle_len, handle_thick, head_size, head_weight, angle, grasp;
};

Words words_for(const envs::ToolSpec& t) {
  Words w;
  w.handle_len = t.handle_length < 0.15 ? "short" : t.handle_length < 0.24 ? "medium length"
                                                                            : "long";
  w.handle_thick = t.handle_width < 0.022 ? "slender" : t.handle_width < 0.036 ? "medium thick"
                                                                                : "thick";
  w.head_size = t.head_length < 0.06 ? "small" : t.head_length < 0.11 ? "medium sized" : "wide";
  w.head_weight = t.head_width < 0.03 ? "thin" : t.head_width < 0.05 ? "solid" : "heavy";
  const double a = std::abs(t.head_angle);
  const std::string side = t.head_angle >= 0 ? "left" : "right";
  if (a < 0.25) w.angle = "a head set crosswise that forms a T shape";
  else if (a < 0.9) w.angle = "a head tilted to the " + side + " into a gentle hook";
  else if (a < 1.3) w.angle = "a head swept sharply to the " + side + " into a deep hook";
  else w.angle = "a head that bends to the " + side + " and nearly continues the handle line";
  const double r = t.grasp_offset / t.handle_length;
  w.grasp = r < 0.3 ? "held at the end of the handle"
            : r < 0.6 ? "held around the middle of the handle"
                      : "held close to the head";
  return w;
}

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& options) {
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

std::string capitalise(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string join_sentences(std::vector<std::string> s, std::mt19937_64& rng) {
  // The opening sentence names the tool; the rest are shuffled.
  std::shuffle(s.begin() + 1, s.end(), rng);
  std::string out;
  for (const auto& x : s) {
    if (!out.empty()) out += ' ';
    out += capitalise(x);
  }
  return out;
}

std::string shape_paragraph(const envs::ToolSpec& t, const Words& w, std::mt19937_64& rng) {
  const auto& fam = family_text(t.family);
  const std::string n = t.name;
  std::vector<std::string> s;
  s.push_back(pick(rng, {"a " + n + " has the outline of " + fam.silhouette + ".",
                         "seen from above, a " + n + " looks like " + fam.silhouette + ".",
                         "the " + n + " has a silhouette resembling " + fam.silhouette + ".",
                         "in shape, a " + n + " is roughly " + fam.silhouette + "."}));
  s.push_back(pick(rng, {"it has " + w.angle + ".", "at the far end it carries " + w.angle + ".",
                         "its shape is defined by " + w.angle + "."}));
  s.push_back(pick(rng, {"the handle is " + w.handle_len + " and " + w.handle_thick + ".",
                         "a " + w.handle_len + ", " + w.handle_thick + " handle leads to the head.",
                         "its handle is " + w.handle_thick + " and " + w.handle_len + "."}));
  s.push_back(pick(rng, {"it is normally " + w.grasp + ".", "the " + n + " is " + w.grasp + ".",
                         "a person uses it " + w.grasp + "."}));
  if (rng() % 2) s.push_back("the head is " + w.head_size + " and " + w.head_weight + ".");
  return join_sentences(s, rng);
}

std::string geometry_paragraph(const envs::ToolSpec& t, const Words& w, std::mt19937_64& rng) {
  const std::string n = t.name;
  auto cm = [](double m) { return std::to_string(static_cast<int>(std::lround(m * 100))); };
  std::vector<std::string> s;
  s.push_back(pick(rng, {"the " + n + " consists of a handle and a head.",
                         "geometrically, a " + n + " is a handle joined to a head.",
                         "a " + n + " is built from two parts, a handle and a head."}));
  s.push_back(pick(rng, {"the handle is " + w.handle_len + ", about " + cm(t.handle_length) +
                             " centimeters long.",
                         "its " + w.handle_len + " handle measures roughly " +
                             cm(t.handle_length) + " centimeters.",
                         "the handle is " + w.handle_thick + " and " + w.handle_len + "."}));
  s.push_back(pick(rng, {"the head is " + w.head_size + ", around " + cm(t.head_length) +
                             " centimeters across, and " + w.head_weight + ".",
                         "a " + w.head_size + ", " + w.head_weight + " head sits on the tip.",
                         "the " + w.head_weight + " head is " + w.head_size + "."}));
  s.push_back(pick(rng, {"there is " + w.angle + ".", "the geometry features " + w.angle + ".",
                         "it ends in " + w.angle + "."}));
  s.push_back(pick(rng, {"the grip point is where it is " + w.grasp + ".",
                         "for a stable grasp it is " + w.grasp + ".",
                         "it should be " + w.grasp + "."}));
  return join_sentences(s, rng);
}

std::string use_paragraph(const envs::ToolSpec& t, std::mt19937_64& rng) {
  const auto& fam = family_text(t.family);
  const std::string n = t.name;
  std::vector<std::string> uses(fam.uses.begin(), fam.uses.end());
  std::shuffle(uses.begin(), uses.end(), rng);
  std::vector<std::string> s;
  s.push_back(pick(rng, {"a " + n + " is commonly used for " + uses[0] + ".",
                         "people usually reach for a " + n + " when " + uses[0] + ".",
                         "the most common use of a " + n + " is " + uses[0] + "."}));
  s.push_back(pick(rng, {"it is also handy for " + uses[1] + ".",
                         "another everyday use is " + uses[1] + ".",
                         "it also helps with " + uses[1] + "."}));
  if (rng() % 2) s.push_back("some people use it for " + uses[2] + ".");
  return join_sentences(s, rng);
}

std::string purpose_paragraph(const envs::ToolSpec& t, std::mt19937_64& rng) {
  const auto& fam = family_text(t.family);
  const std::string n = t.name;
  std::vector<std::string> p(fam.purposes.begin(), fam.purposes.end());
  std::shuffle(p.begin(), p.end(), rng);
  std::vector<std::string> s;
  s.push_back(pick(rng, {"the purpose of a " + n + " is " + p[0] + ".",
                         "a " + n + " is designed for " + p[0] + ".",
                         "a " + n + " exists for " + p[0] + "."}));
  s.push_back(pick(rng, {"it is made for " + p[1] + ".", "it is also meant for " + p[1] + ".",
                         "its design supports " + p[1] + "."}));
  if (rng() % 2) s.push_back("in short, it is about " + p[2] + ".");
  return join_sentences(s, rng);
}

// Pair types in enumeration order: (first bank, second bank).
constexpr std::array<std::pair<int, int>, 4> kPairs = {
    {{0, 2}, {0, 3}, {1, 2}, {1, 3}}};

}  // namespace

std::string to_string(Feature f) {
  switch (f) {
    case Feature::shape: return "shape";
    case Feature::geometry: return "geometry";
    case Feature::common_use: return "common_use";
    case Feature::purpose: return "purpose";
  }
  return "?";
}

Feature parse_feature(const std::string& name) {
  for (Feature f : kFeatures)
    if (to_string(f) == name) return f;
  throw Error("unknown feature '" + name + "'");
}

const FeatureBanks& DescriptionCorpus::at(int tool_id) const {
  const auto it = banks.find(tool_id);
  if (it == banks.end()) throw Error("corpus has no descriptions for tool " + std::to_string(tool_id));
  return it->second;
}

DescriptionCorpus generate_template_corpus(const std::vector<envs::ToolSpec>& catalog,
                                           std::uint64_t seed, int paragraphs) {
  if (paragraphs < 1) throw Error("paragraph count must be positive");
  DescriptionCorpus corpus;
  for (const auto& tool : catalog) {
    const Words w = words_for(tool);
    FeatureBanks banks;
    for (int f = 0; f < 4; ++f) {
      std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(tool.id) * 97 +
                          static_cast<std::uint64_t>(f));
      std::set<std::string> seen;
      auto& bank = banks[static_cast<std::size_t>(f)];
      // Distinct paragraphs; the phrasing space is far larger than the bank.
      for (int attempt = 0; static_cast<int>(bank.size()) < paragraphs; ++attempt) {
        if (attempt > 1000 * paragraphs)
          throw Error("could not generate distinct paragraphs for " + tool.name);
        std::string p;
        switch (kFeatures[static_cast<std::size_t>(f)]) {
          case Feature::shape: p = shape_paragraph(tool, w, rng); break;
          case Feature::geometry: p = geometry_paragraph(tool, w, rng); break;
          case Feature::common_use: p = use_paragraph(tool, rng); break;
          case Feature::purpose: p = purpose_paragraph(tool, rng); break;
        }
        if (seen.insert(p).second) bank.push_back(std::move(p));
      }
    }
    corpus.banks[tool.id] = std::move(banks);
  }
  return corpus;
}

std::size_t combined_count(const FeatureBanks& banks) {
  std::size_t n = 0;
  for (auto [a, b] : kPairs) n += 2 * banks[a].size() * banks[b].size();
  return n;
}

std::string combined_description(const FeatureBanks& banks, std::size_t index) {
  for (auto [a, b] : kPairs) {
    const auto& A = banks[a];
    const auto& B = banks[b];
    const std::size_t block = 2 * A.size() * B.size();
    if (index >= block) {
      index -= block;
      continue;
    }
    const std::size_t i = index / (2 * B.size());
    const std::size_t j = (index / 2) % B.size();
    return index % 2 == 0 ? A[i] + " " + B[j] : B[j] + " " + A[i];
  }
  throw Error("description index out of range");
}

std::vector<std::string> combine_descriptions(const DescriptionCorpus& corpus, int tool_id) {
  const auto& banks = corpus.at(tool_id);
  for (Feature f : kFeatures)
    if (banks[static_cast<std::size_t>(f)].empty())
      throw Error("tool " + std::to_string(tool_id) + " has an empty " + to_string(f) + " bank");
  const std::size_t n = combined_count(banks);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(combined_description(banks, k));
  return out;
}

namespace {
constexpr const char* kCorpusHeader = "# toolmeta-corpus v1";
}

void write_corpus(const std::filesystem::path& path, const DescriptionCorpus& corpus) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write corpus: " + path.string());
  os << kCorpusHeader << '\n';
  for (const auto& [id, banks] : corpus.banks)
    for (Feature f : kFeatures) {
      const auto& bank = banks[static_cast<std::size_t>(f)];
      for (std::size_t i = 0; i < bank.size(); ++i) {
        std::string text = bank[i];
        std::replace(text.begin(), text.end(), '\t', ' ');
        std::replace(text.begin(), text.end(), '\n', ' ');
        os << id << '\t' << to_string(f) << '\t' << i << '\t' << text << '\n';
      }
    }
}

DescriptionCorpus read_corpus(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read corpus: " + path.string());
  std::string line;
  if (!std::getline(is, line) || text::trim(line) != kCorpusHeader)
    throw FormatError(1, "missing '" + std::string(kCorpusHeader) + "' header");
  DescriptionCorpus corpus;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 4) throw FormatError(lineno, "expected 4 fields");
    try {
      const int id = static_cast<int>(text::parse_int(f[0]));
      const Feature feat = parse_feature(std::string(f[1]));
      const auto index = static_cast<std::size_t>(text::parse_int(f[2]));
      auto& bank = corpus.banks[id][static_cast<std::size_t>(feat)];
      if (index != bank.size()) throw Error("paragraph indices must be consecutive");
      bank.emplace_back(f[3]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(lineno, e.what());
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(lineno, e.what());
    }
  }
  return corpus;
}

}  // namespace toolmeta::lang
