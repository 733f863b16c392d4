#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <vector>

#include "toolmeta/language/corpus.hpp"

namespace toolmeta::lang {

enum class ContextSource { hashed, file };

struct ContextVector {
  std::vector<double> values;
  ContextSource source = ContextSource::hashed;
  int tool_id = -1;
  int description_index = -1;

  bool operator==(const ContextVector&) const = default;
};

using ContextPtr = std::shared_ptr<const ContextVector>;

/// Lowercased alphanumeric tokens; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing (FNV-1a 64) of unigrams and bigrams into `d_lang`
/// buckets, L2-normalised. Throws Error when the text has no tokens.
std::vector<double> hash_embed(std::string_view text, std::size_t d_lang);

using EmbeddingTable = std::map<int, std::vector<ContextVector>>;

/// "# toolmeta-embeddings v1", "# d_lang <n>", then one record per line:
/// tool_id, description_index, values (tab separated).
void write_embedding_file(const std::filesystem::path& path, const EmbeddingTable& table);

/// Reads vectors verbatim. A record whose width differs from the header, or
/// whose tool id is not in `known_tools` (when given), raises FormatError
/// naming that record.
EmbeddingTable load_embedding_file(const std::filesystem::path& path,
                                   const std::optional<std::set<int>>& known_tools = {});

/// Per-episode description sampler over either the hashed template corpus
/// or a precomputed embedding table.
class LanguageSource {
 public:
  /// Hashed contexts of the composed corpus descriptions.
  LanguageSource(DescriptionCorpus corpus, std::size_t d_lang);
  /// Precomputed contexts taken verbatim from a table.
  explicit LanguageSource(EmbeddingTable table);
  /// Loads `file` when given and present, otherwise falls back to hashing.
  static LanguageSource create(DescriptionCorpus corpus, std::size_t d_lang,
                               const std::optional<std::filesystem::path>& file);

  std::size_t d_lang() const noexcept { return d_lang_; }
  ContextSource source() const noexcept { return source_; }
  std::size_t description_count(int tool_id) const;

  /// Uniform draw over the tool's descriptions.
  ContextPtr sample(int tool_id, std::mt19937_64& rng) const;
  ContextPtr get(int tool_id, std::size_t index) const;

 private:
  ContextSource source_;
  std::size_t d_lang_ = 0;
  DescriptionCorpus corpus_;
  EmbeddingTable table_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace toolmeta::lang
