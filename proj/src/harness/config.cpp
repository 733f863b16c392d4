#include "toolmeta/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::harness {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_bool(const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::size_t parse_count(const std::string& v) {
  const long long n = text::parse_int(v);
  if (n < 0) throw std::invalid_argument("must be nonnegative: '" + v + "'");
  return static_cast<std::size_t>(n);
}

int parse_small(const std::string& v) { return static_cast<int>(parse_count(v)); }

std::string show(double v) { return text::format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <class T>
std::string show(T v) { return std::to_string(v); }

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? "," : "") + std::to_string(seeds[i]);
  return out;
}

struct Field {
  const char* key;  // section.key
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define TM_FIELD(key, member, parse) \
  Field{key, [](ExperimentConfig& c, const std::string& v) { c.member = parse(v); }, \
        [](const ExperimentConfig& c) { return show(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"experiment.task", [](ExperimentConfig& c, const std::string& v) { c.task = envs::parse_task(v); },
            [](const ExperimentConfig& c) { return envs::to_string(c.task); }},
      Field{"experiment.variant",
            [](ExperimentConfig& c, const std::string& v) { c.variant = parse_variant(v); },
            [](const ExperimentConfig& c) { return to_string(c.variant); }},
      Field{"experiment.seeds",
            [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); },
            [](const ExperimentConfig& c) { return join_seeds(c.seeds); }},
      TM_FIELD("experiment.catalog_seed", catalog_seed, parse_count),
      TM_FIELD("experiment.corpus_seed", corpus_seed, parse_count),
      Field{"experiment.observation",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "state") c.observation = envs::ObservationMode::state_vector;
              else if (v == "grid") c.observation = envs::ObservationMode::grid;
              else throw std::invalid_argument("expected state or grid, got '" + v + "'");
            },
            [](const ExperimentConfig& c) {
              return std::string(c.observation == envs::ObservationMode::grid ? "grid" : "state");
            }},
      TM_FIELD("experiment.grid_side", grid_side, parse_count),
      TM_FIELD("experiment.eval_episodes", eval_episodes, parse_small),
      TM_FIELD("experiment.embed_per_tool", embed_per_tool, parse_count),

      TM_FIELD("network.hidden", hidden, parse_count),
      TM_FIELD("network.encoder_width", encoder_width, parse_count),
      TM_FIELD("network.language_width", language_width, parse_count),

      TM_FIELD("sac.discount", train.sac.discount, text::parse_double),
      TM_FIELD("sac.entropy_coef", train.sac.entropy_coef, text::parse_double),
      TM_FIELD("sac.tau", train.sac.tau, text::parse_double),
      TM_FIELD("sac.target_networks", train.sac.target_networks, parse_bool),
      TM_FIELD("sac.batch_size", train.sac.batch_size, parse_count),
      TM_FIELD("sac.actor_update_period", train.sac.actor_update_period, parse_small),
      TM_FIELD("sac.learning_rate", train.sac.adam.learning_rate, text::parse_double),

      TM_FIELD("meta.meta_lr", train.meta_lr, text::parse_double),
      TM_FIELD("meta.tools_per_iteration", train.tools_per_iteration, parse_small),
      TM_FIELD("meta.meta_updates", train.meta_updates, parse_small),
      TM_FIELD("meta.inner_iterations", train.inner_iterations, parse_small),
      TM_FIELD("meta.replay_ratio", train.replay_ratio, text::parse_double),
      TM_FIELD("meta.meta_iterations", train.meta_iterations, parse_small),
      TM_FIELD("meta.mix_fraction", train.mix_fraction, text::parse_double),
      TM_FIELD("meta.meta_capacity", train.meta_capacity, parse_count),
      TM_FIELD("meta.multitask_capacity", train.multitask_capacity, parse_count),
      TM_FIELD("meta.episodes_per_collect", train.episodes_per_collect, parse_small),
      TM_FIELD("meta.seed_from_meta", train.seed_from_meta, parse_count),
      TM_FIELD("meta.running_window", train.running_window, parse_count),
      TM_FIELD("meta.reset_adam_per_block", train.reset_adam_per_block, parse_bool),
      TM_FIELD("meta.workers", train.workers, parse_count),

      TM_FIELD("adapt.iterations", train.adapt_iterations, parse_small),
      TM_FIELD("adapt.eval_episodes", train.eval_episodes, parse_small),
      TM_FIELD("adapt.from_scratch", adapt_from_scratch, parse_bool),

      Field{"paths.catalog", [](ExperimentConfig& c, const std::string& v) { c.paths.catalog = v; },
            [](const ExperimentConfig& c) { return c.paths.catalog.string(); }},
      Field{"paths.corpus", [](ExperimentConfig& c, const std::string& v) { c.paths.corpus = v; },
            [](const ExperimentConfig& c) { return c.paths.corpus.string(); }},
      Field{"paths.embeddings",
            [](ExperimentConfig& c, const std::string& v) { c.paths.embeddings = v; },
            [](const ExperimentConfig& c) { return c.paths.embeddings.string(); }},
      Field{"paths.checkpoints",
            [](ExperimentConfig& c, const std::string& v) { c.paths.checkpoints = v; },
            [](const ExperimentConfig& c) { return c.paths.checkpoints.string(); }},
      Field{"paths.out", [](ExperimentConfig& c, const std::string& v) { c.paths.out = v; },
            [](const ExperimentConfig& c) { return c.paths.out.string(); }},
  };
  return f;
}

#undef TM_FIELD

}  // namespace

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream is(text);
  std::string raw, section;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view s = text::trim(raw);
    if (const auto c = s.find_first_of("#;"); c != std::string_view::npos) s = text::trim(s.substr(0, c));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError(line, "malformed section header");
      section = std::string(text::trim(s.substr(1, s.size() - 2)));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line, "expected key = value");
    const std::string key(text::trim(s.substr(0, eq)));
    if (key.empty()) throw ConfigError(line, "missing key");
    if (section.empty()) throw ConfigError(line, "key '" + key + "' outside a section");
    const std::string full = section + "." + key;
    if (doc.entries_.count(full)) throw ConfigError(line, "duplicate key '" + full + "'");
    doc.set(full, std::string(text::trim(s.substr(eq + 1))), line);
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(0, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void IniDocument::set(const std::string& key, std::string value, std::size_t line) {
  entries_[key] = Entry{std::move(value), line};
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::atla: return "ATLA";
    case Variant::at_tinyla: return "AT-TinyLA";
    case Variant::at: return "AT";
    case Variant::at_xl: return "AT-XL";
    case Variant::sac_la: return "SAC-LA";
    case Variant::sac: return "SAC";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants())
    if (lower(to_string(v)) == lower(name)) return v;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::atla, Variant::at_tinyla, Variant::at,
                                         Variant::at_xl, Variant::sac_la,   Variant::sac};
  return v;
}

VariantTraits variant_traits(Variant v) {
  switch (v) {
    case Variant::atla: return {768, 1.0, true};
    case Variant::at_tinyla: return {128, 1.0, true};
    case Variant::at: return {0, 1.0, true};
    case Variant::at_xl: return {0, 2.0, true};
    case Variant::sac_la: return {768, 1.0, false};
    case Variant::sac: return {0, 1.0, false};
  }
  return {};
}

std::vector<std::size_t> ExperimentConfig::hidden_widths() const {
  const auto w = static_cast<std::size_t>(static_cast<double>(hidden) *
                                          variant_traits(variant).hidden_multiplier);
  return {w, w};
}

policy::PolicySpec ExperimentConfig::policy_spec() const {
  const envs::TaskEnv env = env_setup().make();
  policy::PolicySpec s = policy::spec_for_env(env, d_lang(), hidden_widths());
  s.encoder_width = encoder_width;
  s.language_width = language_width;
  return s;
}

rl::EnvSetup ExperimentConfig::env_setup() const {
  rl::EnvSetup e;
  e.task = task;
  e.mode = observation;
  e.grid_side = grid_side;
  return e;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError(0, "experiment.seeds must not be empty");
  if (hidden == 0) throw ConfigError(0, "network.hidden must be positive");
  if (encoder_width == 0) throw ConfigError(0, "network.encoder_width must be positive");
  if (language_width == 0) throw ConfigError(0, "network.language_width must be positive");
  if (eval_episodes < 1) throw ConfigError(0, "experiment.eval_episodes must be at least 1");
  if (observation == envs::ObservationMode::grid && grid_side != 32 && grid_side != 128)
    throw ConfigError(0, "experiment.grid_side must be 32 or 128");
  train.validate();
}

ExperimentConfig config_from_ini(const IniDocument& doc) {
  ExperimentConfig cfg;
  for (const auto& [key, entry] : doc.entries()) {
    const auto& f = fields();
    const auto it = std::find_if(f.begin(), f.end(), [&](const Field& x) { return key == x.key; });
    if (it == f.end()) throw ConfigError(entry.line, "unknown key '" + key + "'");
    try {
      it->set(cfg, entry.value);
    } catch (const std::exception& e) {
      throw ConfigError(entry.line, key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void apply_env_overrides(IniDocument& doc, const char* const* env) {
  static const std::string prefix = "TOOLMETA_";
  for (; env && *env; ++env) {
    const std::string item(*env);
    const auto eq = item.find('=');
    if (eq == std::string::npos || item.rfind(prefix, 0) != 0) continue;
    const std::string name = lower(item.substr(prefix.size(), eq - prefix.size()));
    const auto us = name.find('_');
    if (us == std::string::npos || us == 0 || us + 1 == name.size()) continue;
    doc.set(name.substr(0, us) + "." + name.substr(us + 1), item.substr(eq + 1));
  }
}

std::string render_config(const ExperimentConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    const std::string key(f.key);
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += key.substr(dot + 1) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (auto part : text::split(text, ',')) {
    part = text::trim(part);
    try {
      const long long v = text::parse_int(part);
      if (v < 0) throw std::invalid_argument("negative");
      seeds.push_back(static_cast<std::uint64_t>(v));
    } catch (const std::invalid_argument&) {
      throw ConfigError(0, "bad seed '" + std::string(part) + "' in '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError(0, "seed list is empty");
  return seeds;
}

}  // namespace toolmeta::harness
