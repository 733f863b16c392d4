#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "toolmeta/envs/tool_catalog.hpp"

namespace toolmeta::lang {

enum class Feature { shape, geometry, common_use, purpose };
inline constexpr std::array<Feature, 4> kFeatures = {Feature::shape, Feature::geometry,
                                                     Feature::common_use, Feature::purpose};
std::string to_string(Feature f);
Feature parse_feature(const std::string& name);

/// Four paragraph banks per tool, indexed by Feature.
using FeatureBanks = std::array<std::vector<std::string>, 4>;

struct DescriptionCorpus {
  std::map<int, FeatureBanks> banks;  // keyed by tool id

  const FeatureBanks& at(int tool_id) const;
  bool operator==(const DescriptionCorpus&) const = default;
};

inline constexpr int kParagraphsPerFeature = 10;

/// Templated paragraphs describing each tool's silhouette, dimensions, uses
/// and purpose. Geometry is put into words (length buckets, hook side and
/// strength, where the handle is held), so tools that look alike read alike.
DescriptionCorpus generate_template_corpus(const std::vector<envs::ToolSpec>& catalog,
                                           std::uint64_t seed,
                                           int paragraphs = kParagraphsPerFeature);

/// Pairs one {shape | geometry} paragraph with one {common_use | purpose}
/// paragraph, in both orders. Full banks give 2*2*10*10*2 = 800 texts. The
/// enumeration order is fixed: pair type, first index, second index, order.
std::vector<std::string> combine_descriptions(const DescriptionCorpus& corpus, int tool_id);

/// Number of composed descriptions without materialising them.
std::size_t combined_count(const FeatureBanks& banks);

/// Composed description `index` in the order of combine_descriptions.
std::string combined_description(const FeatureBanks& banks, std::size_t index);

/// Text file: "# toolmeta-corpus v1", then tool_id, feature, index, text
/// separated by tabs (text has tabs and newlines replaced by spaces).
void write_corpus(const std::filesystem::path& path, const DescriptionCorpus& corpus);
DescriptionCorpus read_corpus(const std::filesystem::path& path);

}  // namespace toolmeta::lang
