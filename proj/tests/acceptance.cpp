// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   acceptance [--criteria 1,2,...] [--out DIR] [--workers N]
//
// Criteria 6 to 8 train policies and take tens of minutes on one core; the
// rest finish in seconds.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "grad_check.hpp"
#include "toolmeta/errors.hpp"
#include "toolmeta/harness/oracle.hpp"
#include "toolmeta/harness/pipeline.hpp"
#include "toolmeta/harness/plot.hpp"
#include "toolmeta/harness/results.hpp"
#include "toolmeta/language/pca.hpp"
#include "toolmeta/rl/train.hpp"
#include "toolmeta/runtime.hpp"
#include "toolmeta/text_io.hpp"

using namespace toolmeta;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ad::Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<rl::TransitionPtr> random_transitions(const policy::PolicySpec& spec, std::size_t n,
                                                  std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::vector<lang::ContextPtr> pool;
  for (int k = 0; k < 3; ++k) {
    lang::ContextVector c;
    for (std::size_t i = 0; i < spec.d_lang; ++i) c.values.push_back(g(rng));
    pool.push_back(std::make_shared<const lang::ContextVector>(std::move(c)));
  }
  std::vector<rl::TransitionPtr> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto t = std::make_shared<rl::Transition>();
    for (std::size_t j = 0; j < spec.observation_size(); ++j) {
      t->obs.push_back(g(rng));
      t->next_obs.push_back(g(rng));
    }
    for (std::size_t j = 0; j < spec.action_dim(); ++j)
      t->action.push_back(spec.action_low[j] + (spec.action_high[j] - spec.action_low[j]) * u(rng));
    t->reward = u(rng);
    t->done = i % 4 == 3;
    t->context = spec.d_lang ? pool[i % 3] : nullptr;
    t->episode_id = static_cast<std::int64_t>(i % 3);
    out.push_back(std::move(t));
  }
  return out;
}

double segment_abs(const ad::ParamVector& p, const char* name) {
  double s = 0.0;
  for (double v : p.segment(name)) s += std::abs(v);
  return s;
}

bool bit_equal(const ad::ParamVector& a, const ad::ParamVector& b) {
  return a.same_layout(b) && a.size() == b.size() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------- 1
Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  auto note = [&](double err, const std::string& what) {
    if (err > worst) {
      worst = err;
      where = what;
    }
  };
  constexpr int kConfigs = 20;
  for (int seed = 0; seed < kConfigs; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    policy::PolicySpec spec;
    spec.obs_dim = pick(3, 9);
    spec.d_lang = seed % 3 == 0 ? 0 : pick(4, 20);
    spec.language_width = pick(4, 12);
    spec.encoder_width = pick(4, 12);
    spec.hidden = {pick(6, 20), pick(6, 20)};
    const std::size_t a = pick(1, 4);
    for (std::size_t j = 0; j < a; ++j) {
      const double lo = -std::uniform_real_distribution<double>(0.05, 1.0)(rng);
      spec.action_low.push_back(lo);
      spec.action_high.push_back(lo + std::uniform_real_distribution<double>(0.1, 2.0)(rng));
    }
    const policy::Policy pol(spec);
    // Jitter away from the initialisation: zero biases put dead rows exactly
    // on relu kinks, where central differences average the two slopes.
    auto params = pol.build(static_cast<std::uint64_t>(100 + seed));
    {
      std::normal_distribution<double> jitter(0.0, 0.05);
      for (double& v : params.data()) v += jitter(rng);
    }
    const std::size_t n = pick(3, 8);
    const auto batch = rl::make_sac_batch(random_transitions(spec, n, rng), spec.d_lang);

    // Critic loss against fixed targets, every coordinate.
    ad::Vector y(static_cast<Eigen::Index>(n));
    for (auto& v : y) v = std::uniform_real_distribution<double>(-1, 2)(rng);
    const auto cg = rl::critic_loss_grad(pol, params, batch, y);
    const auto cr = testing::check_param_gradient(
        [&](std::span<const double> q) {
          ad::ParamVector p = params;
          std::copy(q.begin(), q.end(), p.data().begin());
          return rl::critic_loss_grad(pol, p, batch, y).loss;
        },
        params.data(), cg.grad.data(), 1e-5);
    note(cr.worst_relative_error, fmt::format("critic config {} coord {}", seed, cr.worst_index));

    // Actor loss with fixed noise over the actor segment.
    rl::SacConfig sac;
    sac.entropy_coef = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
    const ad::Matrix noise = gaussian(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(a), rng);
    const auto ag = rl::actor_loss_grad(pol, params, batch, sac, noise);
    const auto seg = params.segment_info(policy::kActorSegment);
    const auto ar = testing::check_param_gradient(
        [&](std::span<const double> q) {
          ad::ParamVector p = params;
          std::copy(q.begin(), q.end(), p.segment(policy::kActorSegment).begin());
          return rl::actor_loss_grad(pol, p, batch, sac, noise).loss;
        },
        params.segment(policy::kActorSegment), ag.grad.data().subspan(seg.offset, seg.length), 1e-5);
    note(ar.worst_relative_error, fmt::format("actor config {} coord {}", seed, ar.worst_index));

    // Raw network: an MLP with layernorm, or a small conv stack.
    std::vector<ad::LayerSpec> layers;
    if (seed % 2 == 0) {
      const std::size_t in = pick(2, 8), h1 = pick(4, 16), h2 = pick(4, 16);
      layers = {ad::LayerSpec::dense(in, h1), ad::LayerSpec::layernorm(h1), ad::LayerSpec::relu(h1),
                ad::LayerSpec::dense(h1, h2), ad::LayerSpec::tanh(h2), ad::LayerSpec::dense(h2, 3)};
    } else {
      const auto c1 = ad::LayerSpec::conv2d({pick(7, 11), pick(7, 11), pick(1, 3)}, 3, 2, pick(2, 4));
      const auto c2 = ad::LayerSpec::conv2d(c1.out_image, 2, 1, 2);
      layers = {c1, ad::LayerSpec::relu(c1.out), c2, ad::LayerSpec::tanh(c2.out),
                ad::LayerSpec::dense(c2.out, 2)};
    }
    const ad::Network net(layers);
    std::vector<double> w(net.param_count());
    net.initialize(w, rng);
    for (double& v : w) v += std::normal_distribution<double>(0.0, 0.05)(rng);
    const ad::Matrix x = gaussian(3, static_cast<Eigen::Index>(net.input_size()), rng);
    const ad::Matrix g = gaussian(3, static_cast<Eigen::Index>(net.output_size()), rng);
    std::vector<double> grad(w.size(), 0.0);
    net.backward(w, net.forward_cached(w, x), g, grad, false);
    const auto nr = testing::check_param_gradient(
        [&](std::span<const double> q) { return (net.forward(q, x).array() * g.array()).sum(); }, w,
        grad, 1e-5);
    note(nr.worst_relative_error, fmt::format("network config {} coord {}", seed, nr.worst_index));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 60.0,
          fmt::format("worst relative error {:.2e} ({}) over {} configs x 3 checks, {:.1f} s", worst,
                      where, kConfigs, t)};
}

// ---------------------------------------------------------------- 2
Outcome interpolation() {
  envs::TaskEnv env(envs::Task::pushing);
  const policy::Policy pol(policy::spec_for_env(env, 768));
  const auto theta = pol.build(1), prime = pol.build(2);
  const bool zero = bit_equal(ad::axpy(theta, prime, 0.0), theta);
  const bool one = bit_equal(ad::axpy(theta, prime, 1.0), prime);
  ad::ParamVector a = theta, b = prime;
  std::fill(a.data().begin(), a.data().end(), 1.0);
  std::fill(b.data().begin(), b.data().end(), 3.0);
  const auto mid = ad::axpy(a, b, 0.5);
  const bool midpoint = std::all_of(mid.data().begin(), mid.data().end(), [](double v) { return v == 2.0; });
  return {zero && one && midpoint,
          fmt::format("{} params: alpha=0 {}, alpha=1 {}, midpoint (1,3,0.5)->2 {}", theta.size(),
                      zero ? "bit-exact" : "DIFFERS", one ? "bit-exact" : "DIFFERS",
                      midpoint ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- 3
Outcome architecture() {
  const auto conv = policy::conv_encoder_layers(128);
  ad::ImageShape out{};
  for (const auto& l : conv)
    if (l.kind == ad::LayerKind::conv2d) out = l.out_image;
  const bool conv_ok = out.height == 4 && out.width == 4 && out.channels == 16;

  envs::TaskEnv grid_env(envs::Task::sweeping, envs::ObservationMode::grid, 128);
  const policy::Policy grid(policy::spec_for_env(grid_env, 768));
  const bool enc_ok = grid.encoder_output_size() == grid_env.views().size() * 4 * 4 * 16;
  const bool lang_ok = grid.language_network().output_size() == 128;

  // Gradient sparsity on a state policy with language.
  envs::TaskEnv env(envs::Task::sweeping);
  auto spec = policy::spec_for_env(env, 768, {32, 32});
  const policy::Policy pol(spec);
  const auto params = pol.build(4);
  std::mt19937_64 rng(5);
  const auto batch = rl::make_sac_batch(random_transitions(spec, 16, rng), spec.d_lang);
  const auto ag = rl::actor_loss_grad(pol, params, batch, rl::SacConfig{}, gaussian(16, 4, rng));
  ad::Vector y = ad::Vector::Constant(16, 0.5);
  const auto cg = rl::critic_loss_grad(pol, params, batch, y);
  const bool actor_sparse = segment_abs(ag.grad, policy::kCriticSegment) == 0.0 &&
                            segment_abs(ag.grad, policy::kLanguageSegment) == 0.0 &&
                            segment_abs(ag.grad, policy::kEncoderSegment) == 0.0 &&
                            segment_abs(ag.grad, policy::kActorSegment) > 0.0;
  const bool critic_path = segment_abs(cg.grad, policy::kActorSegment) == 0.0 &&
                           segment_abs(cg.grad, policy::kLanguageSegment) > 0.0 &&
                           segment_abs(cg.grad, policy::kEncoderSegment) > 0.0;
  return {conv_ok && enc_ok && lang_ok && actor_sparse && critic_path,
          fmt::format("conv 128x128 -> {}x{}x{} per view ({} views); language width {}; actor loss "
                      "grad zero on critic/language/encoder: {}; critic loss reaches "
                      "language/encoder only via critic path: {}",
                      out.height, out.width, out.channels, grid_env.views().size(),
                      grid.language_network().output_size(), actor_sparse ? "yes" : "NO",
                      critic_path ? "yes" : "NO")};
}

// ---------------------------------------------------------------- 4
Outcome rewards() {
  // Reward table rows written out independently of the environment.
  const std::map<envs::Task, std::vector<double>> table = {
      {envs::Task::pushing, {1.0}},
      {envs::Task::lifting, {0.1, 0.5}},
      {envs::Task::sweeping, {0.1, 0.1, 0.5}},
      {envs::Task::hammering, {0.1, 0.1, 0.5}}};
  const auto catalog = envs::generate_catalog(7);
  double worst = 0.0;
  bool weights_ok = true;
  for (const auto& [task, w] : table) {
    envs::TaskEnv env(task);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      env.reset(catalog[seed * 7 % catalog.size()], seed);
      auto t = env.reward_terms();
      const auto init = env.state().initial_distances;
      weights_ok &= t.count == w.size();
      for (std::size_t i = 0; i < t.count && i < w.size(); ++i) weights_ok &= t.weights[i] == w[i];
      const double full = std::accumulate(w.begin(), w.end(), 0.0);
      const std::pair<double, double> points[] = {{0.0, full}, {1.0, 0.0}, {0.5, full / 2}};
      for (const auto& [frac, expected] : points) {
        for (std::size_t i = 0; i < t.count; ++i) t.distances[i] = frac * init[i];
        worst = std::max(worst, std::abs(envs::shaped_reward(t, init) - expected));
      }
    }
  }
  // Lifting at half distances is 0.30 through the full environment path.
  envs::TaskEnv lift(envs::Task::lifting);
  lift.reset(catalog[2], 5);
  auto s = lift.state();
  const auto init = s.initial_distances;
  s.tool_z = init[1] / 2;
  const envs::Vec2 g = lift.grasp_point_world();
  s.ee = {g.x, g.y, s.tool_z + init[0] / 2, 0.0};
  lift.set_state(s);
  const double half_lift = lift.reward();
  worst = std::max(worst, std::abs(half_lift - 0.30));
  return {weights_ok && worst <= 1e-12,
          fmt::format("4 rows x 5 layouts at zero/initial/half distance, worst error {:.1e}; "
                      "lifting half distances -> {:.15f}",
                      worst, half_lift)};
}

// ---------------------------------------------------------------- 5
Outcome replay() {
  rl::ReplayBuffer meta(30000);
  for (int i = 0; i < 30123; ++i) {
    auto t = std::make_shared<rl::Transition>();
    t->obs = t->next_obs = t->action = {0.0};
    t->tool_id = i;
    t->episode_id = i;
    meta.push(t);
  }
  const bool fifo = meta.size() == 30000 && meta.at(0)->tool_id == 123 &&
                    meta.at(29999)->tool_id == 30122 && meta.evictions() == 123;

  rl::ReplayBuffer base;
  for (int i = 0; i < 1000; ++i) {
    auto t = std::make_shared<rl::Transition>();
    t->obs = t->next_obs = t->action = {0.0};
    t->tool_id = -1;
    t->episode_id = 100000 + i;
    base.push(t);
  }
  std::mt19937_64 rng(17);
  std::uint64_t from_meta = 0;
  constexpr int kBatches = 100000;
  for (int k = 0; k < kBatches; ++k)
    for (const auto& t : rl::mixed_sample(base, meta, 128, 0.3, rng)) from_meta += t->tool_id >= 0;
  const double share = static_cast<double>(from_meta) / (128.0 * kBatches);

  // Adaptation after a short meta-training run must not touch the meta buffer.
  const auto catalog = envs::generate_catalog(7);
  envs::TaskEnv env(envs::Task::pushing);
  auto spec = policy::spec_for_env(env, 0, {16, 16});
  spec.encoder_width = 16;
  const policy::Policy pol(spec);
  rl::TrainConfig cfg;
  cfg.sac.batch_size = 16;
  cfg.replay_ratio = 0.5;
  cfg.meta_iterations = 3;
  cfg.inner_iterations = 2;
  cfg.meta_lr = 0.5;
  const auto trained = rl::meta_train(pol, pol.build(1), envs::tools_in_split(catalog, envs::Split::train),
                                      nullptr, rl::EnvSetup{}, cfg, 1);
  const auto before = trained.replay->reads();
  std::uint64_t reads = 0;
  for (const auto& tool : envs::tools_in_split(catalog, envs::Split::test))
    reads += rl::adapt(pol, trained.best_params, tool, nullptr, rl::EnvSetup{}, cfg, 1, trained.replay.get())
                 .meta_reads;
  const bool no_reads = reads == 0 && trained.replay->reads() == before && before > 0;
  return {fifo && std::abs(share - 0.3) <= 0.01 && no_reads,
          fmt::format("capacity 30000 after 30123 pushes: {}; meta share over 1e5 batches {:.4f}; "
                      "meta reads during 9 adaptations {} (meta-training read {})",
                      fifo ? "FIFO ok" : "WRONG", share, reads, before)};
}

// ---------------------------------------------------------------- 6
Outcome sac_smoke(std::size_t workers) {
  const auto t0 = Clock::now();
  const auto catalog = envs::generate_catalog(7);
  const auto& tool = envs::find_tool(catalog, 8);
  constexpr int kEvalEpisodes = 5;
  constexpr int kEvery = 25;
  constexpr std::uint64_t kEvalSeed = 1000;
  double oracle = 0.0;
  for (int k = 0; k < kEvalEpisodes; ++k)
    oracle += harness::scripted_oracle(envs::Task::pushing, tool, kEvalSeed + k) / kEvalEpisodes;

  envs::TaskEnv env(envs::Task::pushing);
  auto spec = policy::spec_for_env(env, 0);
  const policy::Policy pol(spec);
  rl::TrainConfig cfg;
  cfg.inner_iterations = 1;
  cfg.meta_iterations = 500;  // one episode per iteration
  cfg.replay_ratio = 2;
  cfg.workers = workers;
  const rl::EnvSetup setup;

  int reached = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    double best = 0.0;
    int at = -1;
    rl::TrainHooks hooks;
    hooks.on_iteration = [&](int it, const ad::ParamVector& p) {
      if ((it + 1) % kEvery) return;
      double e = 0.0;
      for (int k = 0; k < kEvalEpisodes; ++k) {
        rl::EpisodeSpec s;
        s.tool = &tool;
        s.seed = kEvalSeed + static_cast<std::uint64_t>(k);
        s.deterministic = true;
        s.record = false;
        e += rl::run_episode(pol, p, setup, s).reward / kEvalEpisodes;
      }
      best = std::max(best, e);
      if (at < 0 && e >= 0.9 * oracle) at = it + 1;
    };
    hooks.stop = [&] { return at > 0; };
    rl::train_multitask(pol, pol.build(seed), {tool}, nullptr, setup, cfg, seed, hooks);
    reached += at > 0;
    per_seed += fmt::format("{}seed {}: {}", per_seed.empty() ? " " : ", ", seed,
                            at > 0 ? fmt::format("{} episodes", at) : fmt::format("best {:.3f}", best));
  }
  const double t = seconds_since(t0);
  return {reached >= 2 && t < 15 * 60,
          fmt::format("oracle {:.4f} on tool 8, threshold 0.9x;{}; {}/3 seeds, {:.0f} s", oracle,
                      per_seed, reached, t)};
}

// ---------------------------------------------------------------- 7, 8
harness::ExperimentConfig scaled_config(envs::Task task, harness::Variant v, std::size_t workers) {
  harness::ExperimentConfig c;
  c.task = task;
  c.variant = v;
  c.seeds = {0, 1, 2};
  c.hidden = 64;
  c.encoder_width = 64;
  c.language_width = 128;
  c.train.sac.batch_size = 64;
  c.train.replay_ratio = 4;
  c.train.meta_lr = 0.5;
  c.train.meta_iterations = 200;
  c.train.eval_episodes = 3;
  c.train.workers = workers;
  return c;
}

struct TaskRuns {
  fs::path dir;
  std::vector<harness::ResultSummary> summary;
  double seconds = 0.0;
  double language_ablation_seconds = 0.0;  // the AT run only criterion 8 needs

  const harness::ResultSummary* find(const std::string& variant, int tool) const {
    for (const auto& s : summary)
      if (s.variant == variant && s.tool_id == tool) return &s;
    return nullptr;
  }
};

/// Meta-trains and adapts each variant, adapts the scratch baseline, and
/// aggregates. Reuses nothing from earlier invocations.
TaskRuns run_task(const fs::path& out, envs::Task task, const std::vector<harness::Variant>& variants,
                  std::size_t workers, std::ostream& log) {
  const auto t0 = Clock::now();
  TaskRuns r;
  r.dir = out / envs::to_string(task);
  fs::remove_all(r.dir);
  for (auto v : variants) {
    const auto tv = Clock::now();
    harness::RunRequest req;
    req.config = scaled_config(task, v, workers);
    req.stages = {harness::Stage::train_meta, harness::Stage::adapt};
    req.run_dir = r.dir;
    req.log = &log;
    harness::run_pipeline(req);
    if (v == harness::Variant::at) r.language_ablation_seconds = seconds_since(tv);
  }
  harness::RunRequest scratch;
  scratch.config = scaled_config(task, harness::Variant::at, workers);
  scratch.config.adapt_from_scratch = true;
  scratch.stages = {harness::Stage::adapt, harness::Stage::plot};
  scratch.run_dir = r.dir;
  scratch.log = &log;
  harness::run_pipeline(scratch);
  r.summary = harness::ResultTable::read(r.dir / "results.tsv").summarize();
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<int> test_tools() {
  std::vector<int> ids;
  for (const auto& t : envs::tools_in_split(envs::generate_catalog(7), envs::Split::test)) ids.push_back(t.id);
  return ids;
}

Outcome meta_vs_scratch(const std::map<envs::Task, TaskRuns>& runs) {
  bool pass = true;
  double seconds = 0.0;
  std::string detail;
  for (const auto& [task, r] : runs) {
    int wins = 0;
    double meta = 0.0, scratch = 0.0;
    for (int id : test_tools()) {
      const auto* m = r.find("ATLA", id);
      const auto* s = r.find("AT-scratch", id);
      if (!m || !s) return {false, fmt::format("missing results for tool {} in {}", id, r.dir.string())};
      wins += m->mean > s->mean;
      meta += m->mean / 9.0;
      scratch += s->mean / 9.0;
    }
    pass &= wins >= 6;
    seconds += r.seconds - r.language_ablation_seconds;
    detail += fmt::format("{}: meta-init wins {}/9 (mean best {:.3f} vs scratch {:.3f}); ",
                          envs::to_string(task), wins, meta, scratch);
  }
  pass &= seconds <= 2 * 3600;
  const auto c = scaled_config(envs::Task::pushing, harness::Variant::atla, 1);
  return {pass, detail + fmt::format("{} meta iterations x {} seeds per task, {:.0f} s",
                                     c.train.meta_iterations, c.seeds.size(), seconds)};
}

Outcome language_claim(const TaskRuns& r, const fs::path& out) {
  const std::vector<int> tools = test_tools();
  std::string table = "tool\tATLA mean\tATLA std\tAT mean\tAT std\n";
  double atla = 0.0, at = 0.0;
  for (int id : tools) {
    const auto* a = r.find("ATLA", id);
    const auto* b = r.find("AT", id);
    if (!a || !b) return {false, fmt::format("missing sweeping results for tool {}", id)};
    atla += a->mean / 9.0;
    at += b->mean / 9.0;
    table += fmt::format("{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\n", id, a->mean, a->stddev, b->mean, b->stddev);
  }
  // Spread of the nine-tool mean across seeds.
  const auto rows = harness::ResultTable::read(r.dir / "results.tsv").rows();
  auto seed_spread = [&](const std::string& variant) {
    std::map<std::uint64_t, double> per_seed;
    for (const auto& row : rows)
      if (row.variant == variant) per_seed[row.seed] += row.best / 9.0;
    double m = 0.0, ss = 0.0;
    for (const auto& [s, v] : per_seed) m += v / static_cast<double>(per_seed.size());
    for (const auto& [s, v] : per_seed) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
  };
  const double sa = seed_spread("ATLA"), sb = seed_spread("AT");
  const bool overlap = atla - sa <= at + sb && at - sb <= atla + sa;
  table += fmt::format("mean\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\n", atla, sa, at, sb);
  table += overlap ? "note: the +-1 std intervals overlap; the difference is within seed noise\n"
                   : "note: the +-1 std intervals do not overlap\n";
  harness::write_text(out / "language_table.tsv", table);
  std::cout << table;
  return {atla >= at,
          fmt::format("sweeping mean best: ATLA {:.4f} +- {:.4f}, AT {:.4f} +- {:.4f}{}; table in {}",
                      atla, sa, at, sb,
                      overlap ? " (margin within noise: +-1 std intervals overlap)" : "",
                      (out / "language_table.tsv").string())};
}

// ---------------------------------------------------------------- 9
Outcome determinism(const fs::path& out) {
  const fs::path root = out / "determinism";
  fs::remove_all(root);
  std::ostringstream log;
  auto run = [&](const std::string& name, std::size_t workers, harness::Variant v) {
    harness::RunRequest req;
    req.config.variant = v;
    req.config.seeds = {0, 1};
    req.config.hidden = 16;
    req.config.encoder_width = 16;
    req.config.language_width = 16;
    req.config.train.sac.batch_size = 16;
    req.config.train.replay_ratio = 0.5;
    req.config.train.meta_iterations = 3;
    req.config.train.adapt_iterations = 3;
    req.config.train.episodes_per_collect = 3;
    req.config.train.workers = workers;
    req.stages = variant_traits(v).meta
                     ? std::vector<harness::Stage>{harness::Stage::train_meta, harness::Stage::adapt}
                     : std::vector<harness::Stage>{harness::Stage::train_multitask, harness::Stage::adapt};
    req.run_dir = root / name;
    req.log = &log;
    harness::run_pipeline(req);
  };
  std::size_t compared = 0, differing = 0;
  for (auto v : {harness::Variant::atla, harness::Variant::sac}) {
    const std::string tag = harness::to_string(v);
    run(tag + "-a", 1, v);
    run(tag + "-b", 1, v);
    run(tag + "-c", 3, v);
    // results.tsv records absolute provenance paths, so the run directory
    // itself is masked before comparing.
    auto slurp = [&](const fs::path& run, const fs::path& rel) {
      std::ifstream in(run / rel, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      std::string s = ss.str();
      const std::string prefix = run.string();
      for (auto pos = s.find(prefix); pos != std::string::npos; pos = s.find(prefix, pos))
        s.replace(pos, prefix.size(), "<run>");
      return s;
    };
    const fs::path first = root / (tag + "-a");
    for (const auto& e : fs::recursive_directory_iterator(first)) {
      if (!e.is_regular_file() || e.path().extension() != ".tsv") continue;
      const auto rel = fs::relative(e.path(), first);
      const std::string a = slurp(first, rel);
      for (const char* other : {"-b", "-c"}) {
        ++compared;
        differing += a != slurp(root / (tag + other), rel);
      }
    }
  }
  return {differing == 0 && compared > 0,
          fmt::format("{} metrics/result files compared across reruns and 1 vs 3 workers, {} differ",
                      compared, differing)};
}

// ---------------------------------------------------------------- 10
Outcome corpus() {
  const auto catalog = envs::generate_catalog(7);
  const auto corpus = lang::generate_template_corpus(catalog, 7);
  bool counts = true;
  for (const auto& t : catalog) {
    counts &= lang::combined_count(corpus.at(t.id)) == 800;
    counts &= lang::combine_descriptions(corpus, t.id).size() == 800;
  }
  // Embeddings of a fixed subsample per tool.
  constexpr std::size_t kPerTool = 20;
  std::vector<std::vector<double>> vecs;
  std::vector<int> owner;
  double worst_norm = 0.0;
  bool repro = true;
  for (const auto& t : catalog) {
    const auto texts = lang::combine_descriptions(corpus, t.id);
    for (std::size_t k = 0; k < kPerTool; ++k) {
      const auto& text = texts[(k * 41) % texts.size()];
      auto v = lang::hash_embed(text, 768);
      double n = 0.0;
      for (double x : v) n += x * x;
      worst_norm = std::max(worst_norm, std::abs(std::sqrt(n) - 1.0));
      repro &= lang::hash_embed(text, 768) == v;
      vecs.push_back(std::move(v));
      owner.push_back(t.id);
    }
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(vecs.size()), 768);
  for (std::size_t i = 0; i < vecs.size(); ++i)
    for (std::size_t j = 0; j < 768; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vecs[i][j];
  const auto pca = lang::pca_project(x, 50);
  bool monotone = true;
  for (std::size_t k = 1; k < pca.explained_ratio.size(); ++k)
    monotone &= pca.explained_ratio[k] <= pca.explained_ratio[k - 1];
  double same = 0.0, cross = 0.0;
  std::size_t ns = 0, nc = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i)
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      const double c = lang::cosine(vecs[i], vecs[j]);
      if (owner[i] == owner[j]) {
        same += c;
        ++ns;
      } else {
        cross += c;
        ++nc;
      }
    }
  const double margin = same / static_cast<double>(ns) - cross / static_cast<double>(nc);
  return {counts && worst_norm < 1e-12 && repro && monotone && margin > 0.0,
          fmt::format("800 descriptions per tool: {}; max | |v| - 1 | {:.1e}; reproducible {}; PCA "
                      "ratios nonincreasing {}; same-tool minus cross-tool cosine {:.4f}",
                      counts ? "yes" : "NO", worst_norm, repro ? "yes" : "NO",
                      monotone ? "yes" : "NO", margin)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance criteria"};
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  std::string out = "acceptance_out";
  std::size_t workers = 1;
  app.add_option("--criteria", criteria, "comma-separated criterion numbers");
  app.add_option("--out", out, "directory for run artifacts");
  app.add_option("--workers", workers, "episode collection threads for the learning runs");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  for (auto part : text::split(criteria, ',')) selected.insert(static_cast<int>(text::parse_int(text::trim(part))));
  const fs::path out_dir = fs::absolute(out);
  fs::create_directories(out_dir);
  std::ofstream run_log(out_dir / "runs.log");

  const std::map<int, std::string> names = {
      {1, "gradient correctness"}, {2, "interpolation algebra"},  {3, "architecture fidelity"},
      {4, "reward transcriptions"}, {5, "replay mechanics"},      {6, "SAC learning smoke test"},
      {7, "meta-init beats scratch"}, {8, "language vs no language"}, {9, "determinism"},
      {10, "corpus and embeddings"}};

  std::map<envs::Task, TaskRuns> learned;
  auto ensure_runs = [&](envs::Task task) -> const TaskRuns& {
    if (!learned.count(task)) {
      std::vector<harness::Variant> v = {harness::Variant::atla};
      if (task == envs::Task::sweeping && selected.count(8)) v.push_back(harness::Variant::at);
      learned[task] = run_task(out_dir, task, v, workers, run_log);
    }
    return learned.at(task);
  };

  int failed = 0;
  for (int id : selected) {
    if (!names.count(id)) {
      std::cout << fmt::format("[FAIL] C{} unknown criterion\n", id);
      ++failed;
      continue;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      switch (id) {
        case 1: o = gradients(); break;
        case 2: o = interpolation(); break;
        case 3: o = architecture(); break;
        case 4: o = rewards(); break;
        case 5: o = replay(); break;
        case 6: o = sac_smoke(workers); break;
        case 7: {
          std::map<envs::Task, TaskRuns> runs;
          for (auto task : {envs::Task::pushing, envs::Task::sweeping}) runs[task] = ensure_runs(task);
          o = meta_vs_scratch(runs);
          break;
        }
        case 8: o = language_claim(ensure_runs(envs::Task::sweeping), out_dir); break;
        case 9: o = determinism(out_dir); break;
        case 10: o = corpus(); break;
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("[{}] C{} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", id,
                             names.at(id), o.detail, seconds_since(t0))
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
