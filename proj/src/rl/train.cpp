#include "toolmeta/rl/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::rl {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

lang::ContextPtr draw_context(const policy::Policy& pol, const lang::LanguageSource* language,
                              const envs::ToolSpec& tool, std::mt19937_64& rng) {
  if (!pol.spec().uses_language()) return nullptr;
  if (!language) throw Error("language-conditioned policy needs a description source");
  if (language->d_lang() != pol.spec().d_lang)
    throw Error("description width " + std::to_string(language->d_lang()) +
                " does not match the policy's d_lang " + std::to_string(pol.spec().d_lang));
  return language->sample(tool.id, rng);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Keeps the parameters with the highest running-average training reward.
/// Until the window first fills, the latest parameters are kept.
class BestTracker {
 public:
  explicit BestTracker(std::size_t window) : window_(window) {}

  void offer(const std::vector<double>& rewards, const ParamVector& params, int iteration) {
    if (rewards.empty()) return;
    const std::size_t k = std::min(window_, rewards.size());
    const double avg =
        std::accumulate(rewards.end() - static_cast<std::ptrdiff_t>(k), rewards.end(), 0.0) /
        static_cast<double>(k);
    last_ = avg;
    const bool full = rewards.size() >= window_;
    if (full ? (!full_ || avg > best_) : !full_) {
      best_ = avg;
      full_ = full;
      iteration_ = iteration;
      params_ = params;
    }
  }
  double last() const { return last_; }
  double best() const { return best_; }
  int iteration() const { return iteration_; }
  const ParamVector& params() const { return params_; }

 private:
  std::size_t window_;
  bool full_ = false;
  double best_ = -std::numeric_limits<double>::infinity();
  double last_ = kNaN;
  int iteration_ = -1;
  ParamVector params_;
};

/// Turns a fractional update budget into whole updates without drift.
class UpdateBudget {
 public:
  std::uint64_t take(double amount) {
    acc_ += amount;
    const double whole = std::floor(acc_ + 1e-9);
    acc_ -= whole;
    if (acc_ < 0.0) acc_ = 0.0;
    return static_cast<std::uint64_t>(whole);
  }

 private:
  double acc_ = 0.0;
};

struct UpdateTally {
  std::uint64_t updates = 0;
  double critic = 0.0;
  double actor = 0.0;
  std::uint64_t actor_updates = 0;

  void add(const UpdateStats& s) {
    ++updates;
    critic += s.critic_loss;
    if (s.actor_updated) {
      actor += s.actor_loss;
      ++actor_updates;
    }
  }
  double critic_mean() const { return updates ? critic / static_cast<double>(updates) : kNaN; }
  double actor_mean() const {
    return actor_updates ? actor / static_cast<double>(actor_updates) : kNaN;
  }
};

UpdateTally run_updates(SacLearner& learner, ReplayBuffer& base, ReplayBuffer& meta,
                        std::uint64_t count, double fraction, std::size_t batch,
                        std::mt19937_64& rng) {
  UpdateTally t;
  for (std::uint64_t u = 0; u < count; ++u)
    t.add(learner.update(mixed_sample(base, meta, batch, fraction, rng), rng));
  return t;
}

std::vector<EpisodeSpec> episode_specs(const policy::Policy& pol,
                                       const lang::LanguageSource* language,
                                       const std::vector<const envs::ToolSpec*>& tools,
                                       std::uint64_t seed, std::uint64_t stream,
                                       std::int64_t& next_id, std::mt19937_64& rng) {
  std::vector<EpisodeSpec> specs;
  specs.reserve(tools.size());
  for (const auto* tool : tools) {
    EpisodeSpec s;
    s.tool = tool;
    s.context = draw_context(pol, language, *tool, rng);
    s.episode_id = next_id++;
    s.seed = derive_seed(seed, stream, static_cast<std::uint64_t>(s.episode_id));
    specs.push_back(std::move(s));
  }
  return specs;
}

void emit(std::vector<MetricsRecord>& log, const TrainHooks& hooks, MetricsRecord r) {
  if (hooks.on_record) hooks.on_record(r);
  log.push_back(std::move(r));
}

std::string cell(double v) { return std::isnan(v) ? "NA" : text::format_double(v); }

double parse_cell(std::string_view s) { return s == "NA" ? kNaN : text::parse_double(s); }

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError(0, what); };
  if (!(sac.discount > 0.0 && sac.discount <= 1.0)) bad("discount must lie in (0, 1]");
  if (!(sac.entropy_coef >= 0.0)) bad("entropy coefficient must be nonnegative");
  if (!(sac.tau > 0.0 && sac.tau <= 1.0)) bad("tau must lie in (0, 1]");
  if (sac.batch_size == 0) bad("batch size must be positive");
  if (sac.actor_update_period < 1) bad("actor update period must be positive");
  if (!(sac.adam.learning_rate > 0.0)) bad("base learning rate must be positive");
  if (!(meta_lr > 0.0 && meta_lr <= 1.0)) bad("meta learning rate must lie in (0, 1]");
  if (tools_per_iteration < 1) bad("tools per iteration must be positive");
  if (meta_updates < 1) bad("meta updates must be positive");
  if (inner_iterations < 1) bad("inner iterations must be positive");
  if (adapt_iterations < 0) bad("adaptation iterations must be nonnegative");
  if (!(replay_ratio > 0.0)) bad("replay ratio must be positive");
  if (meta_iterations < 0) bad("meta iterations must be nonnegative");
  if (!(mix_fraction >= 0.0 && mix_fraction <= 1.0)) bad("mixing fraction must lie in [0, 1]");
  if (meta_capacity == 0) bad("meta buffer capacity must be positive");
  if (multitask_capacity == 0) bad("multitask buffer capacity must be positive");
  if (episodes_per_collect < 1) bad("episodes per collection must be positive");
  if (running_window == 0) bad("running-average window must be positive");
  if (eval_episodes < 1) bad("evaluation episodes must be positive");
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricsRecord>& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write metrics file " + path.string());
  os << "phase\titeration\tm\tb\ttool_id\tepisodes\tepisode_reward\teval_reward\t"
        "running_average\tcritic_loss\tactor_loss\tupdates\tnew_transitions\tbase_size\t"
        "meta_size\tmeta_reads\n";
  for (const auto& r : log) {
    os << r.phase << '\t' << r.iteration << '\t' << r.m << '\t' << r.b << '\t' << r.tool_id
       << '\t' << r.episodes << '\t' << cell(r.episode_reward) << '\t' << cell(r.eval_reward)
       << '\t' << cell(r.running_average) << '\t' << cell(r.critic_loss) << '\t'
       << cell(r.actor_loss) << '\t' << r.updates << '\t' << r.new_transitions << '\t'
       << r.base_size << '\t' << r.meta_size << '\t' << r.meta_reads << '\n';
  }
  if (!os) throw Error("failed writing metrics file " + path.string());
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read metrics file " + path.string());
  std::string line;
  std::vector<MetricsRecord> out;
  std::size_t record = 0;
  if (!std::getline(is, line) || line.rfind("phase\t", 0) != 0)
    throw FormatError(1, "missing metrics header in " + path.string());
  while (std::getline(is, line)) {
    ++record;
    if (line.empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 16) throw FormatError(record + 1, "expected 16 fields, got " + std::to_string(f.size()));
    try {
      MetricsRecord r;
      r.phase = std::string(f[0]);
      r.iteration = static_cast<int>(text::parse_int(f[1]));
      r.m = static_cast<int>(text::parse_int(f[2]));
      r.b = static_cast<int>(text::parse_int(f[3]));
      r.tool_id = static_cast<int>(text::parse_int(f[4]));
      r.episodes = static_cast<int>(text::parse_int(f[5]));
      r.episode_reward = parse_cell(f[6]);
      r.eval_reward = parse_cell(f[7]);
      r.running_average = parse_cell(f[8]);
      r.critic_loss = parse_cell(f[9]);
      r.actor_loss = parse_cell(f[10]);
      r.updates = static_cast<std::uint64_t>(text::parse_int(f[11]));
      r.new_transitions = static_cast<std::uint64_t>(text::parse_int(f[12]));
      r.base_size = static_cast<std::size_t>(text::parse_int(f[13]));
      r.meta_size = static_cast<std::size_t>(text::parse_int(f[14]));
      r.meta_reads = static_cast<std::uint64_t>(text::parse_int(f[15]));
      out.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw FormatError(record + 1, std::string("bad field: ") + e.what());
    }
  }
  return out;
}

TrainResult meta_train(const policy::Policy& pol, ParamVector init,
                       const std::vector<envs::ToolSpec>& tools,
                       const lang::LanguageSource* language, const EnvSetup& env,
                       const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  pol.check_layout(init);
  if (tools.empty()) throw Error("meta-training needs at least one tool");

  std::mt19937_64 rng(derive_seed(seed, 1, 0));
  TrainResult res;
  res.replay = std::make_shared<ReplayBuffer>(cfg.meta_capacity);
  ReplayBuffer& meta = *res.replay;
  SacLearner learner(pol, init, cfg.sac);
  ParamVector theta = std::move(init);
  BestTracker best(cfg.running_window);
  std::int64_t next_episode = 0;
  const auto N = static_cast<std::size_t>(cfg.tools_per_iteration);
  const auto B = static_cast<std::size_t>(cfg.inner_iterations);

  for (int it = 0; it < cfg.meta_iterations; ++it) {
    try {
      std::vector<const envs::ToolSpec*> chosen(N);
      std::uniform_int_distribution<std::size_t> pick(0, tools.size() - 1);
      for (auto& c : chosen) c = &tools[pick(rng)];

      // Base buffers start from uniform draws of the meta buffer.
      std::vector<ReplayBuffer> bases(N);
      for (auto& base : bases) {
        const std::size_t k = std::min(cfg.seed_from_meta, meta.size());
        for (std::size_t j = 0; j < k; ++j) base.push(meta.sample(rng));
      }
      std::vector<std::vector<TransitionPtr>> fresh(N);
      std::vector<std::vector<std::uint64_t>> collected(N, std::vector<std::uint64_t>(B, 0));
      std::vector<UpdateBudget> budget(N);
      std::uint64_t new_count = 0;

      for (int m = 1; m <= cfg.meta_updates; ++m) {
        const ParamVector anchor = theta;
        std::vector<ParamVector> primes;
        primes.reserve(N);
        for (std::size_t i = 0; i < N; ++i) {
          learner.set_params(anchor);
          if (cfg.reset_adam_per_block) learner.reset_optimizers();
          for (std::size_t b = 0; b < B; ++b) {
            MetricsRecord rec;
            rec.phase = "base";
            rec.iteration = it;
            rec.m = m;
            rec.b = static_cast<int>(b) + 1;
            rec.tool_id = chosen[i]->id;
            std::vector<double> rewards;
            if (m == 1) {
              const std::vector<const envs::ToolSpec*> ts(
                  static_cast<std::size_t>(cfg.episodes_per_collect), chosen[i]);
              const auto specs = episode_specs(pol, language, ts, seed, 2, next_episode, rng);
              auto eps = collect(pol, learner.params(), env, specs, cfg.workers);
              for (auto& ep : eps) {
                rewards.push_back(ep.reward);
                res.episode_rewards.push_back(ep.reward);
                for (auto& t : ep.transitions) {
                  bases[i].push(t);
                  fresh[i].push_back(t);
                  ++collected[i][b];
                }
              }
              new_count += collected[i][b];
            }
            const std::uint64_t n_updates = budget[i].take(
                cfg.replay_ratio * static_cast<double>(collected[i][b]) / cfg.meta_updates);
            const UpdateTally tally = run_updates(learner, bases[i], meta, n_updates,
                                                  cfg.mix_fraction, cfg.sac.batch_size, rng);
            rec.episodes = static_cast<int>(rewards.size());
            rec.episode_reward = mean_of(rewards);
            rec.eval_reward = kNaN;
            rec.running_average = kNaN;
            rec.critic_loss = tally.critic_mean();
            rec.actor_loss = tally.actor_mean();
            rec.updates = tally.updates;
            rec.new_transitions = m == 1 ? collected[i][b] : 0;
            rec.base_size = bases[i].size();
            rec.meta_size = meta.size();
            rec.meta_reads = meta.reads();
            res.total_updates += tally.updates;
            emit(res.log, hooks, std::move(rec));
          }
          primes.push_back(learner.params());
        }
        // theta + alpha * sum_i (theta'_i - theta) == axpy towards the mean
        // with step alpha * N; N = 1 keeps the exact endpoints.
        ParamVector target = primes.front();
        if (N > 1) {
          auto t = target.data();
          for (std::size_t i = 1; i < N; ++i) {
            const auto p = primes[i].data();
            for (std::size_t j = 0; j < t.size(); ++j) t[j] += p[j];
          }
          for (auto& v : t) v /= static_cast<double>(N);
        }
        theta = ad::axpy(anchor, target, cfg.meta_lr * static_cast<double>(N));
        if (hooks.on_meta_update) hooks.on_meta_update(anchor, target, theta);
      }
      learner.set_params(theta);

      for (auto& f : fresh)
        for (auto& t : f) meta.push(t);
      res.replay_peak = std::max(res.replay_peak, meta.size());
      res.new_transitions_per_iteration.push_back(new_count);
      res.total_transitions += new_count;
      best.offer(res.episode_rewards, theta, it);

      MetricsRecord rec;
      rec.phase = "meta_update";
      rec.iteration = it;
      rec.m = cfg.meta_updates;
      rec.tool_id = chosen.front()->id;
      rec.episode_reward = kNaN;
      rec.eval_reward = kNaN;
      rec.running_average = best.last();
      rec.critic_loss = kNaN;
      rec.actor_loss = kNaN;
      rec.new_transitions = new_count;
      rec.meta_size = meta.size();
      rec.meta_reads = meta.reads();
      emit(res.log, hooks, std::move(rec));
      if (hooks.on_iteration) hooks.on_iteration(it, theta);
      if (hooks.stop && hooks.stop()) break;
    } catch (const Error& e) {
      throw Error("meta iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  res.final_params = theta;
  res.best_params = best.iteration() >= 0 ? best.params() : theta;
  res.best_running_average = best.iteration() >= 0 ? best.best() : kNaN;
  res.best_iteration = best.iteration();
  return res;
}

TrainResult train_multitask(const policy::Policy& pol, ParamVector init,
                            const std::vector<envs::ToolSpec>& tools,
                            const lang::LanguageSource* language, const EnvSetup& env,
                            const TrainConfig& cfg, std::uint64_t seed,
                            const TrainHooks& hooks) {
  cfg.validate();
  pol.check_layout(init);
  if (tools.empty()) throw Error("multitask training needs at least one tool");

  std::mt19937_64 rng(derive_seed(seed, 5, 0));
  TrainResult res;
  res.replay = std::make_shared<ReplayBuffer>(cfg.multitask_capacity);
  ReplayBuffer& buffer = *res.replay;
  ReplayBuffer no_meta;
  SacLearner learner(pol, std::move(init), cfg.sac);
  BestTracker best(cfg.running_window);
  UpdateBudget budget;
  std::int64_t next_episode = 0;
  // Same number of collection calls per iteration as meta_train.
  const int collects = cfg.tools_per_iteration * cfg.inner_iterations;
  std::uniform_int_distribution<std::size_t> pick(0, tools.size() - 1);

  for (int it = 0; it < cfg.meta_iterations; ++it) {
    try {
      std::uint64_t new_count = 0;
      for (int c = 0; c < collects; ++c) {
        std::vector<const envs::ToolSpec*> ts(static_cast<std::size_t>(cfg.episodes_per_collect));
        for (auto& t : ts) t = &tools[pick(rng)];
        const auto specs = episode_specs(pol, language, ts, seed, 6, next_episode, rng);
        auto eps = collect(pol, learner.params(), env, specs, cfg.workers);
        std::vector<double> rewards;
        std::uint64_t got = 0;
        for (auto& ep : eps) {
          rewards.push_back(ep.reward);
          res.episode_rewards.push_back(ep.reward);
          for (auto& t : ep.transitions) {
            buffer.push(t);
            ++got;
          }
        }
        new_count += got;
        const UpdateTally tally =
            run_updates(learner, buffer, no_meta, budget.take(cfg.replay_ratio * static_cast<double>(got)),
                        0.0, cfg.sac.batch_size, rng);
        res.total_updates += tally.updates;
        res.replay_peak = std::max(res.replay_peak, buffer.size());

        MetricsRecord rec;
        rec.phase = "multitask";
        rec.iteration = it;
        rec.m = 1;
        rec.b = c + 1;
        rec.tool_id = ts.size() == 1 ? ts.front()->id : -1;
        rec.episodes = static_cast<int>(rewards.size());
        rec.episode_reward = mean_of(rewards);
        rec.eval_reward = kNaN;
        rec.running_average = kNaN;
        rec.critic_loss = tally.critic_mean();
        rec.actor_loss = tally.actor_mean();
        rec.updates = tally.updates;
        rec.new_transitions = got;
        rec.base_size = buffer.size();
        rec.meta_size = 0;
        rec.meta_reads = 0;
        emit(res.log, hooks, std::move(rec));
      }
      res.new_transitions_per_iteration.push_back(new_count);
      res.total_transitions += new_count;
      best.offer(res.episode_rewards, learner.params(), it);
      if (hooks.on_iteration) hooks.on_iteration(it, learner.params());
      if (hooks.stop && hooks.stop()) break;
    } catch (const Error& e) {
      throw Error("multitask iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  res.final_params = learner.params();
  res.best_params = best.iteration() >= 0 ? best.params() : learner.params();
  res.best_running_average = best.iteration() >= 0 ? best.best() : kNaN;
  res.best_iteration = best.iteration();
  return res;
}

double evaluate(const policy::Policy& pol, const ParamVector& params, const envs::ToolSpec& tool,
                const lang::LanguageSource* language, const EnvSetup& env, int episodes,
                std::uint64_t seed) {
  if (episodes < 1) throw Error("evaluation needs at least one episode");
  std::mt19937_64 rng(derive_seed(seed, 7, static_cast<std::uint64_t>(tool.id)));
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EpisodeSpec s;
    s.tool = &tool;
    s.context = draw_context(pol, language, tool, rng);
    s.seed = derive_seed(seed, 8, static_cast<std::uint64_t>(e));
    s.deterministic = true;
    s.record = false;
    sum += run_episode(pol, params, env, s).reward;
  }
  return sum / episodes;
}

AdaptResult adapt(const policy::Policy& pol, ParamVector params, const envs::ToolSpec& tool,
                  const lang::LanguageSource* language, const EnvSetup& env,
                  const TrainConfig& cfg, std::uint64_t seed, ReplayBuffer* meta,
                  const TrainHooks& hooks) {
  cfg.validate();
  pol.check_layout(params);
  AdaptResult res;
  if (cfg.adapt_iterations == 0) {
    res.params = std::move(params);
    return res;
  }
  ReplayBuffer unused;
  ReplayBuffer& meta_ref = meta ? *meta : unused;
  const std::uint64_t reads_before = meta_ref.reads();
  std::mt19937_64 rng(derive_seed(seed, 3, static_cast<std::uint64_t>(tool.id)));
  SacLearner learner(pol, std::move(params), cfg.sac);
  ReplayBuffer base;
  UpdateBudget budget;
  std::int64_t next_episode = 0;

  for (int b = 0; b < cfg.adapt_iterations; ++b) {
    try {
      const std::vector<const envs::ToolSpec*> ts(static_cast<std::size_t>(cfg.episodes_per_collect), &tool);
      const auto specs = episode_specs(pol, language, ts, seed ^ 0x5a5aULL, 9, next_episode, rng);
      auto eps = collect(pol, learner.params(), env, specs, cfg.workers);
      std::vector<double> rewards;
      std::uint64_t got = 0;
      for (auto& ep : eps) {
        rewards.push_back(ep.reward);
        for (auto& t : ep.transitions) {
          base.push(t);
          ++got;
        }
      }
      // Fraction 0: every draw comes from the base buffer.
      const UpdateTally tally =
          run_updates(learner, base, meta_ref, budget.take(cfg.replay_ratio * static_cast<double>(got)),
                      0.0, cfg.sac.batch_size, rng);
      const double eval = evaluate(pol, learner.params(), tool, language, env, cfg.eval_episodes,
                                   derive_seed(seed, 10, static_cast<std::uint64_t>(b)));
      res.curve.push_back(eval);
      res.train_curve.push_back(mean_of(rewards));

      MetricsRecord rec;
      rec.phase = "adapt";
      rec.iteration = b + 1;
      rec.m = 0;
      rec.b = b + 1;
      rec.tool_id = tool.id;
      rec.episodes = static_cast<int>(rewards.size());
      rec.episode_reward = mean_of(rewards);
      rec.eval_reward = eval;
      rec.running_average = kNaN;
      rec.critic_loss = tally.critic_mean();
      rec.actor_loss = tally.actor_mean();
      rec.updates = tally.updates;
      rec.new_transitions = got;
      rec.base_size = base.size();
      rec.meta_size = meta_ref.size();
      rec.meta_reads = meta_ref.reads() - reads_before;
      emit(res.log, hooks, std::move(rec));
    } catch (const Error& e) {
      throw Error("adaptation iteration " + std::to_string(b + 1) + " on tool " +
                  std::to_string(tool.id) + ": " + e.what());
    }
  }
  res.params = learner.params();
  res.best = *std::max_element(res.curve.begin(), res.curve.end());
  res.meta_reads = meta_ref.reads() - reads_before;
  return res;
}

}  // namespace toolmeta::rl
