#include "toolmeta/language/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::lang {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void add_feature(std::vector<double>& v, std::string_view key) {
  const std::uint64_t h = fnv1a(key);
  const std::size_t bucket = static_cast<std::size_t>(h % v.size());
  v[bucket] += (h >> 63) ? -1.0 : 1.0;
}

constexpr const char* kEmbeddingHeader = "# toolmeta-embeddings v1";

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<double> hash_embed(std::string_view text, std::size_t d_lang) {
  if (d_lang == 0) throw Error("embedding width must be positive");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error("cannot embed text without tokens");
  std::vector<double> v(d_lang, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(v, tokens[i]);
    if (i + 1 < tokens.size()) add_feature(v, tokens[i] + ' ' + tokens[i + 1]);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  // Every bucket can cancel to zero only in contrived inputs; fall back to e0.
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine of vectors with different widths");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::size_t d = 0;
  for (const auto& [id, vs] : table)
    for (const auto& v : vs) {
      if (d == 0) d = v.values.size();
      if (v.values.size() != d) throw Error("embedding table mixes widths");
    }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write embeddings: " + path.string());
  os << kEmbeddingHeader << '\n' << "# d_lang " << d << '\n';
  for (const auto& [id, vs] : table)
    for (const auto& v : vs) {
      os << id << '\t' << v.description_index;
      for (double x : v.values) os << '\t' << text::format_double(x);
      os << '\n';
    }
}

EmbeddingTable load_embedding_file(const std::filesystem::path& path,
                                   const std::optional<std::set<int>>& known_tools) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read embeddings: " + path.string());
  std::string line;
  if (!std::getline(is, line) || text::trim(line) != kEmbeddingHeader)
    throw FormatError(1, "missing '" + std::string(kEmbeddingHeader) + "' header");
  if (!std::getline(is, line) || line.rfind("# d_lang ", 0) != 0)
    throw FormatError(2, "missing '# d_lang <n>' line");
  std::size_t d = 0;
  try {
    d = static_cast<std::size_t>(text::parse_int(text::trim(std::string_view(line).substr(9))));
  } catch (const std::invalid_argument& e) {
    throw FormatError(2, e.what());
  }
  if (d == 0) throw FormatError(2, "d_lang must be positive");

  EmbeddingTable table;
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != d + 2)
      throw FormatError(lineno, "expected " + std::to_string(d) + " values, found " +
                                    std::to_string(f.size() < 2 ? 0 : f.size() - 2));
    ContextVector v;
    v.source = ContextSource::file;
    try {
      v.tool_id = static_cast<int>(text::parse_int(f[0]));
      v.description_index = static_cast<int>(text::parse_int(f[1]));
      v.values.reserve(d);
      for (std::size_t i = 2; i < f.size(); ++i) v.values.push_back(text::parse_double(f[i]));
    } catch (const std::invalid_argument& e) {
      throw FormatError(lineno, e.what());
    }
    for (double x : v.values)
      if (!std::isfinite(x)) throw FormatError(lineno, "non-finite value");
    if (known_tools && !known_tools->contains(v.tool_id))
      throw FormatError(lineno, "unknown tool id " + std::to_string(v.tool_id));
    table[v.tool_id].push_back(std::move(v));
  }
  return table;
}

LanguageSource::LanguageSource(DescriptionCorpus corpus, std::size_t d_lang)
    : source_(ContextSource::hashed), d_lang_(d_lang), corpus_(std::move(corpus)) {
  if (d_lang_ == 0) throw Error("embedding width must be positive");
}

LanguageSource::LanguageSource(EmbeddingTable table)
    : source_(ContextSource::file), table_(std::move(table)) {
  for (const auto& [id, vs] : table_)
    if (!vs.empty()) {
      d_lang_ = vs.front().values.size();
      break;
    }
  if (d_lang_ == 0) throw Error("embedding table is empty");
}

LanguageSource LanguageSource::create(DescriptionCorpus corpus, std::size_t d_lang,
                                      const std::optional<std::filesystem::path>& file) {
  if (file && std::filesystem::exists(*file)) return LanguageSource(load_embedding_file(*file));
  return LanguageSource(std::move(corpus), d_lang);
}

std::size_t LanguageSource::description_count(int tool_id) const {
  if (source_ == ContextSource::file) {
    const auto it = table_.find(tool_id);
    return it == table_.end() ? 0 : it->second.size();
  }
  const auto it = corpus_.banks.find(tool_id);
  return it == corpus_.banks.end() ? 0 : combined_count(it->second);
}

ContextPtr LanguageSource::get(int tool_id, std::size_t index) const {
  if (index >= description_count(tool_id))
    throw Error("tool " + std::to_string(tool_id) + " has no description " +
                std::to_string(index));
  if (source_ == ContextSource::file)
    return std::make_shared<const ContextVector>(table_.at(tool_id)[index]);
  ContextVector v;
  v.values = hash_embed(combined_description(corpus_.at(tool_id), index), d_lang_);
  v.source = ContextSource::hashed;
  v.tool_id = tool_id;
  v.description_index = static_cast<int>(index);
  return std::make_shared<const ContextVector>(std::move(v));
}

ContextPtr LanguageSource::sample(int tool_id, std::mt19937_64& rng) const {
  const std::size_t n = description_count(tool_id);
  if (n == 0) throw Error("tool " + std::to_string(tool_id) + " has no descriptions");
  return get(tool_id, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

}  // namespace toolmeta::lang
