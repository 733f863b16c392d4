#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolmeta/envs/task_env.hpp"
#include "toolmeta/policy/policy.hpp"
#include "toolmeta/rl/train.hpp"

namespace toolmeta::harness {

/// Sectioned key = value text. '#' and ';' start comments; keys are
/// case-sensitive and stored as "section.key".
class IniDocument {
 public:
  static IniDocument parse(const std::string& text);
  static IniDocument load(const std::filesystem::path& path);

  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0 for values that did not come from the file
  };
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
  void set(const std::string& key, std::string value, std::size_t line = 0);

 private:
  std::map<std::string, Entry> entries_;
};

enum class Variant { atla, at_tinyla, at, at_xl, sac_la, sac };

std::string to_string(Variant v);
/// Accepts the display names (ATLA, AT-TinyLA, AT, AT-XL, SAC-LA, SAC),
/// case-insensitively.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

/// The dimensions along which the variants differ.
struct VariantTraits {
  std::size_t d_lang = 0;      // 0 = no language head
  double hidden_multiplier = 1.0;
  bool meta = true;            // false = multitask SAC
};
VariantTraits variant_traits(Variant v);

struct ExperimentPaths {
  std::filesystem::path catalog;      // empty = generate from catalog_seed
  std::filesystem::path corpus;       // empty = generate from corpus_seed
  std::filesystem::path embeddings;   // empty = hash descriptions on the fly
  std::filesystem::path checkpoints;  // earlier run directory holding trained policies
  std::filesystem::path out = "runs";
};

struct ExperimentConfig {
  envs::Task task = envs::Task::pushing;
  Variant variant = Variant::atla;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::uint64_t catalog_seed = 7;
  std::uint64_t corpus_seed = 7;
  envs::ObservationMode observation = envs::ObservationMode::state_vector;
  std::size_t grid_side = 32;

  std::size_t hidden = 128;  // base width; AT-XL doubles it
  std::size_t encoder_width = 128;
  std::size_t language_width = 128;

  rl::TrainConfig train;
  bool adapt_from_scratch = false;  // baseline: adapt a fresh initialization
  int eval_episodes = 5;            // eval stage episodes per tool
  std::size_t embed_per_tool = 50;  // descriptions written by the embed stage

  ExperimentPaths paths;

  /// d_lang of the variant.
  std::size_t d_lang() const { return variant_traits(variant).d_lang; }
  /// Actor/critic hidden widths of the variant.
  std::vector<std::size_t> hidden_widths() const;
  policy::PolicySpec policy_spec() const;
  rl::EnvSetup env_setup() const;

  /// Throws ConfigError (line 0) on inconsistent values.
  void validate() const;
};

/// Applies every "section.key" of `doc` on top of the defaults. Unknown keys
/// and malformed values raise ConfigError carrying the source line.
ExperimentConfig config_from_ini(const IniDocument& doc);

/// Overrides from variables named TOOLMETA_<SECTION>_<KEY> (upper case),
/// e.g. TOOLMETA_META_REPLAY_RATIO=4. `env` holds NAME=value strings; pass
/// `environ` to read the process environment.
void apply_env_overrides(IniDocument& doc, const char* const* env);

/// Every setting as a parseable INI document (the resolved config).
std::string render_config(const ExperimentConfig& cfg);

/// Parses "0,1,2" into seeds. Throws ConfigError on empty or bad entries.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace toolmeta::harness
