// Command-line front end for the experiment pipeline.
//
//   toolmeta --config exp.ini --stage train-meta,adapt --variant ATLA --seeds 0,1,2
//   toolmeta --stage aggregate --out runs runs/run-a runs/run-b
//
// Settings come from the defaults, then the config file, then variables
// named TOOLMETA_<SECTION>_<KEY>, then the flags. Exit status: 0 success,
// 1 configuration error, 2 runtime error.

#include <iostream>

#include <CLI11.hpp>

#include "toolmeta/errors.hpp"
#include "toolmeta/harness/pipeline.hpp"
#include "toolmeta/runtime.hpp"

extern char** environ;

int main(int argc, char** argv) {
  using namespace toolmeta;
  tune_allocator();

  CLI::App app{"Language-conditioned meta-RL for tool manipulation"};
  std::string config_path, stages, variant, task, seeds, out, embedding_file, run_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  app.add_option("--config", config_path, "INI file with [experiment] [network] [sac] [meta] [adapt] [paths]")
      ->check(CLI::ExistingFile);
  app.add_option("--stage", stages,
                 "comma-separated: gen-tools, gen-corpus, embed, train-meta, train-multitask, "
                 "adapt, eval, aggregate, plot")
      ->required();
  app.add_option("--variant", variant, "ATLA, AT-TinyLA, AT, AT-XL, SAC-LA or SAC");
  app.add_option("--task", task, "pushing, lifting, sweeping or hammering");
  app.add_option("--seeds", seeds, "training/adaptation seeds, e.g. 0,1,2");
  app.add_option("--seed", seed, "catalog and corpus generation seed");
  app.add_option("--out", out, "root directory for timestamped run directories");
  app.add_option("--run-dir", run_dir, "use this exact run directory (continue a run)");
  app.add_option("--workers", workers, "episode collection threads");
  app.add_option("--embedding-file", embedding_file, "precomputed context vectors");
  app.add_option("inputs", inputs, "run directories for aggregate / plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    harness::IniDocument doc =
        config_path.empty() ? harness::IniDocument{} : harness::IniDocument::load(config_path);
    harness::apply_env_overrides(doc, environ);
    if (!variant.empty()) doc.set("experiment.variant", variant);
    if (!task.empty()) doc.set("experiment.task", task);
    if (!seeds.empty()) doc.set("experiment.seeds", seeds);
    if (seed) {
      doc.set("experiment.catalog_seed", std::to_string(*seed));
      doc.set("experiment.corpus_seed", std::to_string(*seed));
    }
    if (!out.empty()) doc.set("paths.out", out);
    if (workers) doc.set("meta.workers", std::to_string(*workers));
    if (!embedding_file.empty()) doc.set("paths.embeddings", embedding_file);

    harness::RunRequest req;
    req.config = harness::config_from_ini(doc);
    req.stages = harness::parse_stages(stages);
    for (const auto& i : inputs) req.inputs.emplace_back(i);
    if (!run_dir.empty()) req.run_dir = run_dir;
    const auto dir = harness::run_pipeline(req);
    std::cout << "run directory: " << dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
