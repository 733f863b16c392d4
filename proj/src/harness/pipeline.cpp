#include "toolmeta/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>

#include <fmt/format.h>

#include "toolmeta/errors.hpp"
#include "toolmeta/harness/plot.hpp"
#include "toolmeta/harness/results.hpp"
#include "toolmeta/language/pca.hpp"
#include "toolmeta/rl/train.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::harness {
namespace fs = std::filesystem;
using ad::ParamVector;

namespace {

constexpr std::pair<Stage, const char*> kStageNames[] = {
    {Stage::gen_tools, "gen-tools"},   {Stage::gen_corpus, "gen-corpus"},
    {Stage::embed, "embed"},           {Stage::train_meta, "train-meta"},
    {Stage::train_multitask, "train-multitask"},
    {Stage::adapt, "adapt"},           {Stage::eval, "eval"},
    {Stage::aggregate, "aggregate"},   {Stage::plot, "plot"}};

struct Context {
  const ExperimentConfig& cfg;
  fs::path run;
  std::ostream& log;
  const std::vector<fs::path>& inputs;
};

void gen_tools(const Context& c) {
  const auto catalog = envs::generate_catalog(c.cfg.catalog_seed);
  envs::write_catalog(c.run / "catalog.tsv", catalog);
  c.log << fmt::format("gen-tools: {} tools -> {}\n", catalog.size(), (c.run / "catalog.tsv").string());
}

void gen_corpus(const Context& c) {
  const auto catalog = load_catalog(c.cfg, c.run);
  const auto corpus = lang::generate_template_corpus(catalog, c.cfg.corpus_seed);
  lang::write_corpus(c.run / "corpus.txt", corpus);
  c.log << fmt::format("gen-corpus: {} tools -> {}\n", corpus.banks.size(),
                       (c.run / "corpus.txt").string());
}

void embed(const Context& c) {
  const auto catalog = load_catalog(c.cfg, c.run);
  const auto corpus = load_corpus(c.cfg, c.run, catalog);
  const std::size_t d = c.cfg.d_lang() ? c.cfg.d_lang() : 768;
  const lang::LanguageSource source(corpus, d);
  lang::EmbeddingTable table;
  std::vector<const lang::ContextVector*> all;
  for (const auto& tool : catalog) {
    const std::size_t n = std::min(c.cfg.embed_per_tool, source.description_count(tool.id));
    auto& rows = table[tool.id];
    for (std::size_t i = 0; i < n; ++i) rows.push_back(*source.get(tool.id, i));
  }
  for (const auto& [id, rows] : table)
    for (const auto& r : rows) all.push_back(&r);
  lang::write_embedding_file(c.run / "embeddings.tsv", table);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(all.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = all[i]->values[j];
  const auto pca = lang::pca_project(x, 50);
  std::string text = "component\texplained_ratio\n";
  for (std::size_t k = 0; k < pca.explained_ratio.size(); ++k)
    text += fmt::format("{}\t{}\n", k + 1, text::format_double(pca.explained_ratio[k]));

  // Same-tool vs cross-tool cosine over the written vectors.
  double same = 0.0, cross = 0.0;
  std::size_t n_same = 0, n_cross = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double cs = lang::cosine(all[i]->values, all[j]->values);
      if (all[i]->tool_id == all[j]->tool_id) {
        same += cs;
        ++n_same;
      } else {
        cross += cs;
        ++n_cross;
      }
    }
  write_text(c.run / "pca.tsv", text);
  c.log << fmt::format("embed: {} vectors of width {}; same-tool cosine {:.4f}, cross-tool {:.4f}\n",
                       all.size(), d, n_same ? same / n_same : 0.0, n_cross ? cross / n_cross : 0.0);
}

void train(const Context& c, bool meta) {
  const auto& cfg = c.cfg;
  if (variant_traits(cfg.variant).meta != meta)
    throw ConfigError(0, fmt::format("variant {} is trained with {}", to_string(cfg.variant),
                                     meta ? "train-multitask" : "train-meta"));
  const auto catalog = load_catalog(cfg, c.run);
  const auto tools = envs::tools_in_split(catalog, envs::Split::train);
  const auto corpus = load_corpus(cfg, c.run, catalog);
  const auto language = make_language(cfg, corpus);
  const policy::PolicySpec spec = cfg.policy_spec();
  const policy::Policy pol(spec);
  for (const auto seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = seed_dir(c.run, variant_label(cfg), seed);
    fs::create_directories(dir);
    rl::TrainHooks hooks;
    hooks.on_iteration = [&](int it, const ParamVector&) {
      if ((it + 1) % 50 == 0)
        c.log << fmt::format("  seed {} iteration {}/{}\n", seed, it + 1, cfg.train.meta_iterations);
    };
    const auto res = meta ? rl::meta_train(pol, pol.build(seed), tools, language.get(),
                                           cfg.env_setup(), cfg.train, seed, hooks)
                          : rl::train_multitask(pol, pol.build(seed), tools, language.get(),
                                                cfg.env_setup(), cfg.train, seed, hooks);
    rl::write_metrics(dir / "train_metrics.tsv", res.log);
    policy::save_policy(dir / "policy.ckpt", spec, res.best_params);
    policy::save_policy(dir / "final.ckpt", spec, res.final_params);
    c.log << fmt::format("{}: {} seed {} best running average {:.4f} at iteration {} ({:.1f} s)\n",
                         meta ? "train-meta" : "train-multitask", to_string(cfg.variant), seed,
                         res.best_running_average, res.best_iteration,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
}

/// Trained parameters of `seed`: this run first, then paths.checkpoints.
ParamVector trained_params(const Context& c, const policy::PolicySpec& spec, std::uint64_t seed) {
  const std::string label = to_string(c.cfg.variant);
  for (const fs::path& root : {c.run, c.cfg.paths.checkpoints}) {
    if (root.empty()) continue;
    const fs::path p = seed_dir(root, label, seed) / "policy.ckpt";
    if (fs::exists(p)) return policy::load_policy(p, spec);
  }
  throw Error(fmt::format("no trained policy for {} seed {}; run train-meta/train-multitask "
                          "first or set paths.checkpoints",
                          label, seed));
}

void summarize_run(const Context& c, const std::vector<fs::path>& dirs) {
  const Aggregate agg = aggregate(dirs);
  for (const auto& p : agg.problems) c.log << "warning: " << p << '\n';
  std::string warn;
  for (const auto& p : agg.problems) warn += p + '\n';
  write_text(c.run / "warnings.txt", warn);
  if (agg.table.empty()) throw Error("nothing to aggregate");
  agg.table.write(c.run / "results.tsv");
  write_summary(c.run / "summary.tsv", agg.table.summarize());
  write_curves(c.run / "curves.tsv", agg.curves);
  for (const auto& s : agg.table.summarize())
    c.log << fmt::format("  {:<14} tool {:>2}  best {:.4f}{}\n", s.variant, s.tool_id, s.mean,
                         s.has_std() ? fmt::format(" +- {:.4f}", s.stddev) : "");
}

void adapt_stage(const Context& c) {
  const auto& cfg = c.cfg;
  const auto catalog = load_catalog(cfg, c.run);
  const auto tests = envs::tools_in_split(catalog, envs::Split::test);
  const auto corpus = load_corpus(cfg, c.run, catalog);
  const auto language = make_language(cfg, corpus);
  const policy::PolicySpec spec = cfg.policy_spec();
  const policy::Policy pol(spec);
  for (const auto seed : cfg.seeds) {
    const ParamVector init = cfg.adapt_from_scratch ? pol.build(rl::derive_seed(seed, 11, 0))
                                                    : trained_params(c, spec, seed);
    const fs::path dir = seed_dir(c.run, variant_label(cfg), seed);
    fs::create_directories(dir);
    for (const auto& tool : tests) {
      const auto res = rl::adapt(pol, init, tool, language.get(), cfg.env_setup(), cfg.train, seed);
      rl::write_metrics(dir / fmt::format("adapt_tool{}.tsv", tool.id), res.log);
      c.log << fmt::format("adapt: {} seed {} tool {} best {:.4f}\n", variant_label(cfg), seed,
                           tool.id, res.best);
    }
  }
  summarize_run(c, {c.run});
}

void eval_stage(const Context& c) {
  const auto& cfg = c.cfg;
  const auto catalog = load_catalog(cfg, c.run);
  const auto tests = envs::tools_in_split(catalog, envs::Split::test);
  const auto corpus = load_corpus(cfg, c.run, catalog);
  const auto language = make_language(cfg, corpus);
  const policy::PolicySpec spec = cfg.policy_spec();
  const policy::Policy pol(spec);
  for (const auto seed : cfg.seeds) {
    const ParamVector params = trained_params(c, spec, seed);
    std::string text = "tool_id\tseed\treward\n";
    for (const auto& tool : tests) {
      const double r = rl::evaluate(pol, params, tool, language.get(), cfg.env_setup(),
                                    cfg.eval_episodes, seed);
      text += fmt::format("{}\t{}\t{}\n", tool.id, seed, text::format_double(r));
      c.log << fmt::format("eval: {} seed {} tool {} reward {:.4f}\n", to_string(cfg.variant),
                           seed, tool.id, r);
    }
    write_text(seed_dir(c.run, to_string(cfg.variant), seed) / "eval.tsv", text);
  }
}

void plot_stage(const Context& c) {
  const auto dirs = c.inputs.empty() ? std::vector<fs::path>{c.run} : c.inputs;
  const Aggregate agg = aggregate(dirs);
  for (const auto& p : agg.problems) c.log << "warning: " << p << '\n';
  const std::string task = envs::to_string(c.cfg.task);
  write_text(c.run / "results.svg",
             bar_chart(agg.table.summarize(), "best post-adaptation reward, " + task).svg);
  std::vector<CurveSeries> series;
  std::vector<std::string> variants;
  for (const auto& cv : agg.curves)
    if (std::find(variants.begin(), variants.end(), cv.variant) == variants.end())
      variants.push_back(cv.variant);
  for (const auto& v : variants) {
    // Average over tools and seeds.
    CurveSeries s{v, {}};
    std::vector<int> count;
    for (const auto& cv : agg.curves) {
      if (cv.variant != v) continue;
      if (s.y.size() < cv.rewards.size()) {
        s.y.resize(cv.rewards.size(), 0.0);
        count.resize(cv.rewards.size(), 0);
      }
      for (std::size_t i = 0; i < cv.rewards.size(); ++i) {
        s.y[i] += cv.rewards[i];
        ++count[i];
      }
    }
    for (std::size_t i = 0; i < s.y.size(); ++i) s.y[i] /= count[i];
    series.push_back(std::move(s));
  }
  write_text(c.run / "curves.svg", line_chart(series, "adaptation curves, " + task).svg);
  c.log << fmt::format("plot: {} and {}\n", (c.run / "results.svg").string(),
                       (c.run / "curves.svg").string());
}

}  // namespace

std::string to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return name;
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (const auto& [stage, n] : kStageNames)
    if (name == n) return stage;
  throw ConfigError(0, "unknown stage '" + name + "'");
}

std::vector<Stage> parse_stages(const std::string& list) {
  std::vector<Stage> out;
  for (auto part : text::split(list, ',')) out.push_back(parse_stage(std::string(text::trim(part))));
  return out;
}

fs::path timestamped_run_dir(const fs::path& root) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "run-%Y%m%d-%H%M%S", &tm);
  fs::path p = root / buf;
  for (int k = 2; fs::exists(p); ++k) p = root / fmt::format("{}-{}", buf, k);
  return p;
}

std::string variant_label(const ExperimentConfig& cfg) {
  return to_string(cfg.variant) + (cfg.adapt_from_scratch ? "-scratch" : "");
}

fs::path seed_dir(const fs::path& run, const std::string& label, std::uint64_t seed) {
  return run / label / fmt::format("seed{}", seed);
}

std::vector<envs::ToolSpec> load_catalog(const ExperimentConfig& cfg, const fs::path& run) {
  if (!cfg.paths.catalog.empty()) return envs::read_catalog(cfg.paths.catalog);
  if (fs::exists(run / "catalog.tsv")) return envs::read_catalog(run / "catalog.tsv");
  return envs::generate_catalog(cfg.catalog_seed);
}

lang::DescriptionCorpus load_corpus(const ExperimentConfig& cfg, const fs::path& run,
                                    const std::vector<envs::ToolSpec>& catalog) {
  if (!cfg.paths.corpus.empty()) return lang::read_corpus(cfg.paths.corpus);
  if (fs::exists(run / "corpus.txt")) return lang::read_corpus(run / "corpus.txt");
  return lang::generate_template_corpus(catalog, cfg.corpus_seed);
}

std::unique_ptr<lang::LanguageSource> make_language(const ExperimentConfig& cfg,
                                                    const lang::DescriptionCorpus& corpus) {
  if (cfg.d_lang() == 0) return nullptr;
  std::optional<fs::path> file;
  if (!cfg.paths.embeddings.empty()) {
    if (!fs::exists(cfg.paths.embeddings))
      throw ConfigError(0, "embedding file " + cfg.paths.embeddings.string() + " does not exist");
    file = cfg.paths.embeddings;
  }
  auto src = std::make_unique<lang::LanguageSource>(
      lang::LanguageSource::create(corpus, cfg.d_lang(), file));
  if (src->d_lang() != cfg.d_lang())
    throw ConfigError(0, fmt::format("embedding width {} does not match variant {} (d_lang {})",
                                     src->d_lang(), to_string(cfg.variant), cfg.d_lang()));
  return src;
}

fs::path run_pipeline(const RunRequest& request) {
  const ExperimentConfig& cfg = request.config;
  cfg.validate();
  if (request.stages.empty()) throw ConfigError(0, "no stage requested");
  std::ostream& log = request.log ? *request.log : std::cout;
  const fs::path run = request.run_dir ? *request.run_dir : timestamped_run_dir(cfg.paths.out);
  fs::create_directories(run);
  write_text(run / "config.ini", render_config(cfg));
  const Context c{cfg, run, log, request.inputs};
  for (const Stage s : request.stages) {
    log << fmt::format("== {} ({}, {}) in {}\n", to_string(s), to_string(cfg.variant),
                       envs::to_string(cfg.task), run.string());
    switch (s) {
      case Stage::gen_tools: gen_tools(c); break;
      case Stage::gen_corpus: gen_corpus(c); break;
      case Stage::embed: embed(c); break;
      case Stage::train_meta: train(c, true); break;
      case Stage::train_multitask: train(c, false); break;
      case Stage::adapt: adapt_stage(c); break;
      case Stage::eval: eval_stage(c); break;
      case Stage::aggregate:
        summarize_run(c, request.inputs.empty() ? std::vector<fs::path>{run} : request.inputs);
        break;
      case Stage::plot: plot_stage(c); break;
    }
  }
  return run;
}

}  // namespace toolmeta::harness
