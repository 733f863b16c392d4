#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toolmeta/envs/tool_catalog.hpp"
#include "toolmeta/harness/config.hpp"
#include "toolmeta/language/corpus.hpp"
#include "toolmeta/language/embedding.hpp"

namespace toolmeta::harness {

enum class Stage {
  gen_tools,
  gen_corpus,
  embed,
  train_meta,
  train_multitask,
  adapt,
  eval,
  aggregate,
  plot
};

std::string to_string(Stage s);
/// Throws ConfigError for an unknown stage name.
Stage parse_stage(const std::string& name);
/// Comma-separated stage list, run in the given order.
std::vector<Stage> parse_stages(const std::string& list);

/// Run directory layout:
///
///   config.ini                          resolved configuration
///   catalog.tsv  corpus.txt             gen-tools / gen-corpus
///   embeddings.tsv  pca.tsv             embed
///   <label>/seed<k>/train_metrics.tsv   train-meta / train-multitask
///   <label>/seed<k>/policy.ckpt         best running-average parameters
///   <label>/seed<k>/final.ckpt
///   <label>/seed<k>/adapt_tool<id>.tsv  adapt
///   <label>/seed<k>/eval.tsv            eval
///   results.tsv  summary.tsv  curves.tsv  warnings.txt   adapt / aggregate
///   results.svg  curves.svg             plot
///
/// <label> is the variant name, with "-scratch" appended for adaptation
/// from a fresh initialization.
struct RunRequest {
  ExperimentConfig config;
  std::vector<Stage> stages;
  std::vector<std::filesystem::path> inputs;  // run dirs for aggregate / plot
  std::optional<std::filesystem::path> run_dir;  // exact directory, no timestamp
  std::ostream* log = nullptr;
};

/// Executes the stages in order inside one run directory and returns it.
/// Configuration problems raise ConfigError, everything else Error.
std::filesystem::path run_pipeline(const RunRequest& request);

/// "run-YYYYmmdd-HHMMSS" under `root`, suffixed "-2", "-3", ... when taken.
std::filesystem::path timestamped_run_dir(const std::filesystem::path& root);

std::string variant_label(const ExperimentConfig& cfg);
std::filesystem::path seed_dir(const std::filesystem::path& run, const std::string& label,
                               std::uint64_t seed);

/// Catalog and corpus as the stages see them: an explicit path, else the
/// run directory's file, else generated from the configured seed.
std::vector<envs::ToolSpec> load_catalog(const ExperimentConfig& cfg,
                                         const std::filesystem::path& run);
lang::DescriptionCorpus load_corpus(const ExperimentConfig& cfg, const std::filesystem::path& run,
                                    const std::vector<envs::ToolSpec>& catalog);
/// Null for variants without language.
std::unique_ptr<lang::LanguageSource> make_language(const ExperimentConfig& cfg,
                                                    const lang::DescriptionCorpus& corpus);

}  // namespace toolmeta::harness
