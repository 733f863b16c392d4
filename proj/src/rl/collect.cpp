#include "toolmeta/rl/collect.hpp"

#include <algorithm>
#include <exception>
#include <random>
#include <thread>

#include "toolmeta/errors.hpp"

namespace toolmeta::rl {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

EpisodeResult run_episode(const policy::Policy& pol, const ParamVector& params,
                          const EnvSetup& setup, const EpisodeSpec& spec) {
  if (!spec.tool) throw Error("episode without a tool");
  envs::TaskEnv env = setup.make();
  std::mt19937_64 rng(derive_seed(spec.seed, 0x6163, 0));
  EpisodeResult out;
  out.tool_id = spec.tool->id;
  out.episode_id = spec.episode_id;
  std::vector<double> obs = env.reset(*spec.tool, spec.seed);
  double sum = 0.0;
  bool done = false;
  while (!done) {
    std::vector<double> action = pol.act(params, obs, spec.context, spec.deterministic, rng);
    envs::StepResult r = env.step(action);
    sum += r.reward;
    out.final_reward = r.reward;
    ++out.steps;
    done = r.done;
    if (spec.record) {
      auto t = std::make_shared<Transition>();
      t->obs = std::move(obs);
      t->context = spec.context;
      t->action = std::move(action);
      t->reward = r.reward;
      t->next_obs = r.observation;
      t->done = r.done;
      t->tool_id = spec.tool->id;
      t->episode_id = spec.episode_id;
      out.transitions.push_back(std::move(t));
    }
    obs = std::move(r.observation);
  }
  out.reward = sum / out.steps;
  return out;
}

std::vector<EpisodeResult> collect(const policy::Policy& pol, const ParamVector& params,
                                   const EnvSetup& setup, const std::vector<EpisodeSpec>& specs,
                                   std::size_t workers) {
  std::vector<EpisodeResult> out(specs.size());
  const std::size_t n_threads = std::min(std::max<std::size_t>(workers, 1), specs.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) out[i] = run_episode(pol, params, setup, specs[i]);
    return out;
  }
  // Static striping: thread k runs episodes k, k + n, ... and writes its own slots.
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t k = 0; k < n_threads; ++k) {
    threads.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < specs.size(); i += n_threads)
          out[i] = run_episode(pol, params, setup, specs[i]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace toolmeta::rl
