#include "toolmeta/policy/policy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "toolmeta/autodiff/checkpoint.hpp"
#include "toolmeta/errors.hpp"
#include "toolmeta/text_io.hpp"

namespace toolmeta::policy {
namespace {

using ad::LayerSpec;

constexpr const char* kSpecTag = "toolmeta-policy v1";

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh2(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

std::vector<LayerSpec> head_layers(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out) {
  std::vector<LayerSpec> l;
  std::size_t w = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    l.push_back(LayerSpec::dense(w, hidden[i]));
    // The first hidden layer is layer-normalised.
    if (i == 0) l.push_back(LayerSpec::layernorm(hidden[i]));
    l.push_back(LayerSpec::relu(hidden[i]));
    w = hidden[i];
  }
  l.push_back(LayerSpec::dense(w, out));
  return l;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + text::format_double(v[i]);
  return s;
}

}  // namespace

std::size_t PolicySpec::observation_size() const {
  if (obs_mode == envs::ObservationMode::state_vector) return obs_dim;
  return grid_views * grid_side * grid_side * envs::kGridChannels;
}

void PolicySpec::validate() const {
  if (action_low.empty() || action_low.size() != action_high.size())
    throw Error("policy spec: action bounds missing or mismatched");
  for (std::size_t i = 0; i < action_low.size(); ++i)
    if (!(std::isfinite(action_low[i]) && std::isfinite(action_high[i]) &&
          action_low[i] < action_high[i]))
      throw Error("policy spec: action bounds must be finite with low < high");
  if (hidden.empty()) throw Error("policy spec: at least one hidden layer required");
  for (auto h : hidden)
    if (h == 0) throw Error("policy spec: hidden widths must be positive");
  if (language_width == 0 || encoder_width == 0)
    throw Error("policy spec: widths must be positive");
  if (obs_mode == envs::ObservationMode::state_vector && obs_dim == 0)
    throw Error("policy spec: obs_dim must be positive");
  if (obs_mode == envs::ObservationMode::grid &&
      (grid_views == 0 || (grid_side != 32 && grid_side != 128)))
    throw Error("policy spec: grid mode needs >= 1 view of side 32 or 128");
}

std::string PolicySpec::serialize() const {
  std::ostringstream os;
  os << kSpecTag << " obs_mode=" << (obs_mode == envs::ObservationMode::grid ? "grid" : "state")
     << " obs_dim=" << obs_dim << " grid_views=" << grid_views << " grid_side=" << grid_side
     << " d_lang=" << d_lang << " language_width=" << language_width
     << " encoder_width=" << encoder_width << " hidden=" << join_sizes(hidden)
     << " action_low=" << join_doubles(action_low) << " action_high=" << join_doubles(action_high);
  return os.str();
}

PolicySpec PolicySpec::parse(const std::string& text_in) {
  if (text_in.rfind(kSpecTag, 0) != 0) throw Error("not a policy spec header");
  PolicySpec s;
  s.hidden.clear();
  std::istringstream is(text_in.substr(std::string(kSpecTag).size()));
  std::string kv;
  try {
    while (is >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("bad spec field '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      auto sizes = [&] {
        std::vector<std::size_t> v;
        for (auto f : text::split(val, ','))
          v.push_back(static_cast<std::size_t>(text::parse_int(f)));
        return v;
      };
      auto doubles = [&] {
        std::vector<double> v;
        for (auto f : text::split(val, ',')) v.push_back(text::parse_double(f));
        return v;
      };
      auto size = [&] { return static_cast<std::size_t>(text::parse_int(val)); };
      if (key == "obs_mode") {
        if (val != "grid" && val != "state") throw Error("bad obs_mode '" + val + "'");
        s.obs_mode = val == "grid" ? envs::ObservationMode::grid
                                   : envs::ObservationMode::state_vector;
      } else if (key == "obs_dim") s.obs_dim = size();
      else if (key == "grid_views") s.grid_views = size();
      else if (key == "grid_side") s.grid_side = size();
      else if (key == "d_lang") s.d_lang = size();
      else if (key == "language_width") s.language_width = size();
      else if (key == "encoder_width") s.encoder_width = size();
      else if (key == "hidden") s.hidden = sizes();
      else if (key == "action_low") s.action_low = doubles();
      else if (key == "action_high") s.action_high = doubles();
      else throw Error("unknown spec field '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("bad policy spec: ") + e.what());
  }
  s.validate();
  return s;
}

PolicySpec spec_for_env(const envs::TaskEnv& env, std::size_t d_lang,
                        std::vector<std::size_t> hidden) {
  PolicySpec s;
  s.obs_mode = env.observation_mode();
  s.obs_dim = envs::TaskEnv::kStateObservationSize;
  s.grid_views = env.views().size();
  s.grid_side = env.grid_side();
  s.d_lang = d_lang;
  s.hidden = std::move(hidden);
  s.action_low = env.config().action_low;
  s.action_high = env.config().action_high;
  s.validate();
  return s;
}

std::vector<LayerSpec> conv_encoder_layers(std::size_t side) {
  std::array<std::size_t, 3> strides{};
  if (side == 128) strides = {4, 3, 2};
  else if (side == 32) strides = {2, 2, 1};
  else throw Error("conv encoder supports sides 32 and 128");
  const std::array<std::size_t, 3> kernels = {7, 5, 3}, channels = {4, 8, 16};
  std::vector<LayerSpec> l;
  ad::ImageShape shape{side, side, envs::kGridChannels};
  for (int i = 0; i < 3; ++i) {
    l.push_back(LayerSpec::conv2d(shape, kernels[i], strides[i], channels[i]));
    shape = l.back().out_image;
    l.push_back(LayerSpec::relu(shape.size()));
  }
  return l;
}

InputBatch make_input_batch(const std::vector<const std::vector<double>*>& observations,
                            const std::vector<lang::ContextPtr>& contexts, std::size_t d_lang) {
  InputBatch b;
  const auto n = static_cast<Eigen::Index>(observations.size());
  const auto w = observations.empty() ? 0 : static_cast<Eigen::Index>(observations[0]->size());
  b.obs.resize(n, w);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = *observations[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(o.size()) != w) throw ShapeError(ShapeError::npos, "ragged observation batch");
    for (Eigen::Index j = 0; j < w; ++j) b.obs(i, j) = o[static_cast<std::size_t>(j)];
  }
  if (d_lang == 0) return b;
  if (contexts.size() != observations.size())
    throw ShapeError(ShapeError::npos, "one context per observation required");
  std::unordered_map<const lang::ContextVector*, int> seen;
  std::vector<const lang::ContextVector*> unique;
  b.context_row.reserve(contexts.size());
  for (const auto& c : contexts) {
    if (!c) throw Error("missing context for a language-conditioned policy");
    auto [it, inserted] = seen.emplace(c.get(), static_cast<int>(unique.size()));
    if (inserted) unique.push_back(c.get());
    b.context_row.push_back(it->second);
  }
  b.contexts.resize(static_cast<Eigen::Index>(unique.size()), static_cast<Eigen::Index>(d_lang));
  for (std::size_t k = 0; k < unique.size(); ++k) {
    if (unique[k]->values.size() != d_lang)
      throw ShapeError(ShapeError::npos, "context width " + std::to_string(unique[k]->values.size()) +
                                             " does not match d_lang " + std::to_string(d_lang));
    for (std::size_t j = 0; j < d_lang; ++j)
      b.contexts(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = unique[k]->values[j];
  }
  return b;
}

Policy::Policy(PolicySpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.obs_mode == envs::ObservationMode::state_vector) {
    encoders_.emplace_back(std::vector<LayerSpec>{LayerSpec::dense(spec_.obs_dim, spec_.encoder_width),
                                                  LayerSpec::relu(spec_.encoder_width)});
  } else {
    for (std::size_t v = 0; v < spec_.grid_views; ++v)
      encoders_.emplace_back(conv_encoder_layers(spec_.grid_side));
  }
  for (const auto& e : encoders_) encoder_out_ += e.output_size();
  if (spec_.uses_language())
    language_ = ad::Network({LayerSpec::dense(spec_.d_lang, spec_.language_width),
                             LayerSpec::relu(spec_.language_width)});
  feature_size_ = encoder_out_ + (spec_.uses_language() ? spec_.language_width : 0);
  const std::size_t A = spec_.action_dim();
  actor_ = ad::Network(head_layers(feature_size_, spec_.hidden, 2 * A));
  critic_ = ad::Network(head_layers(feature_size_ + A, spec_.hidden, 1));
  for (std::size_t i = 0; i < A; ++i) {
    center_.push_back(0.5 * (spec_.action_high[i] + spec_.action_low[i]));
    half_range_.push_back(0.5 * (spec_.action_high[i] - spec_.action_low[i]));
  }
}

ParamVector Policy::build(std::uint64_t seed) const {
  ParamVector p;
  p.add_segment(kLanguageSegment, spec_.uses_language() ? language_.param_count() : 0);
  std::size_t enc = 0;
  for (const auto& e : encoders_) enc += e.param_count();
  p.add_segment(kEncoderSegment, enc);
  p.add_segment(kActorSegment, actor_.param_count());
  p.add_segment(kCriticSegment, 2 * critic_.param_count());

  std::mt19937_64 rng(seed);
  if (spec_.uses_language()) language_.initialize(p.segment(kLanguageSegment), rng);
  auto es = p.segment(kEncoderSegment);
  std::size_t off = 0;
  for (const auto& e : encoders_) {
    e.initialize(es.subspan(off, e.param_count()), rng);
    off += e.param_count();
  }
  actor_.initialize(p.segment(kActorSegment), rng);
  auto cs = p.segment(kCriticSegment);
  critic_.initialize(cs.subspan(0, critic_.param_count()), rng);
  critic_.initialize(cs.subspan(critic_.param_count()), rng);
  return p;
}

void Policy::check_layout(const ParamVector& params) const {
  auto need = [&](const char* name, std::size_t n) {
    if (!params.has_segment(name) || params.segment_info(name).length != n)
      throw LayoutError(std::string("parameter segment '") + name + "' does not match the policy spec");
  };
  need(kLanguageSegment, spec_.uses_language() ? language_.param_count() : 0);
  std::size_t enc = 0;
  for (const auto& e : encoders_) enc += e.param_count();
  need(kEncoderSegment, enc);
  need(kActorSegment, actor_.param_count());
  need(kCriticSegment, 2 * critic_.param_count());
}

Matrix Policy::encode(const ParamVector& params, const InputBatch& in, FeatureCache* cache) const {
  const auto n = in.obs.rows();
  if (static_cast<std::size_t>(in.obs.cols()) != spec_.observation_size())
    throw ShapeError(ShapeError::npos, "observation width " + std::to_string(in.obs.cols()) +
                                           ", policy expects " +
                                           std::to_string(spec_.observation_size()));
  Matrix feat(n, static_cast<Eigen::Index>(feature_size_));
  auto es = params.segment(kEncoderSegment);
  std::size_t poff = 0;
  Eigen::Index col = 0, in_col = 0;
  if (cache) {
    cache->encoder.clear();
    cache->context_row = in.context_row;
  }
  for (const auto& e : encoders_) {
    const auto w = static_cast<Eigen::Index>(e.input_size());
    const Matrix view = in.obs.middleCols(in_col, w);
    const auto ps = es.subspan(poff, e.param_count());
    Matrix out;
    if (cache) {
      cache->encoder.push_back(e.forward_cached(ps, view));
      out = cache->encoder.back().values.back();
    } else {
      out = e.forward(ps, view);
    }
    feat.middleCols(col, out.cols()) = out;
    col += out.cols();
    in_col += w;
    poff += e.param_count();
  }
  if (spec_.uses_language()) {
    if (static_cast<std::size_t>(in.contexts.cols()) != spec_.d_lang ||
        static_cast<Eigen::Index>(in.context_row.size()) != n)
      throw ShapeError(ShapeError::npos, "context batch does not match d_lang");
    const auto ls = params.segment(kLanguageSegment);
    Matrix lang_out;
    if (cache) {
      cache->language = language_.forward_cached(ls, in.contexts);
      lang_out = cache->language.values.back();
    } else {
      lang_out = language_.forward(ls, in.contexts);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      feat.row(i).segment(col, lang_out.cols()) = lang_out.row(in.context_row[static_cast<std::size_t>(i)]);
  }
  return feat;
}

void Policy::encode_backward(const ParamVector& params, const FeatureCache& cache,
                             const Matrix& feature_grad, ParamVector& grad) const {
  auto es = params.segment(kEncoderSegment);
  auto eg = grad.segment(kEncoderSegment);
  std::size_t poff = 0;
  Eigen::Index col = 0;
  for (std::size_t v = 0; v < encoders_.size(); ++v) {
    const auto& e = encoders_[v];
    const auto w = static_cast<Eigen::Index>(e.output_size());
    const Matrix g = feature_grad.middleCols(col, w);
    e.backward(es.subspan(poff, e.param_count()), cache.encoder[v], g,
               eg.subspan(poff, e.param_count()), false);
    col += w;
    poff += e.param_count();
  }
  if (spec_.uses_language()) {
    const auto k = cache.language.values.front().rows();
    Matrix g = Matrix::Zero(k, static_cast<Eigen::Index>(spec_.language_width));
    for (std::size_t i = 0; i < cache.context_row.size(); ++i)
      g.row(cache.context_row[i]) +=
          feature_grad.row(static_cast<Eigen::Index>(i)).segment(col, g.cols());
    language_.backward(params.segment(kLanguageSegment), cache.language, g,
                       grad.segment(kLanguageSegment), false);
  }
}

ActorSample Policy::actor(const ParamVector& params, const Matrix& features,
                          const Matrix& noise) const {
  const auto n = features.rows();
  const auto A = static_cast<Eigen::Index>(spec_.action_dim());
  ActorSample s;
  s.cache = actor_.forward_cached(params.segment(kActorSegment), features);
  const Matrix& out = s.cache.values.back();
  s.mean = out.leftCols(A);
  s.log_std.resize(n, A);
  s.noise = noise.size() == 0 ? Matrix(Matrix::Zero(n, A)) : noise;
  if (s.noise.rows() != n || s.noise.cols() != A)
    throw ShapeError(ShapeError::npos, "noise matrix must be n x action_dim");
  s.squashed.resize(n, A);
  s.action.resize(n, A);
  s.log_prob.resize(n);
  s.std_clamped.assign(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(A)));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < A; ++j) {
      const double raw = out(i, A + j);
      if (!std::isfinite(raw) || !std::isfinite(s.mean(i, j)))
        throw NonFiniteError("actor head produced a non-finite output");
      const double ls = std::clamp(raw, kLogStdMin, kLogStdMax);
      s.std_clamped[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = ls != raw;
      s.log_std(i, j) = ls;
      const double eps = s.noise(i, j);
      const double u = s.mean(i, j) + std::exp(ls) * eps;
      const double t = std::tanh(u);
      s.squashed(i, j) = t;
      const auto ju = static_cast<std::size_t>(j);
      double a = center_[ju] + half_range_[ju] * t;
      // Keep strictly inside the box even when tanh rounds to +-1.
      const double lo = spec_.action_low[ju], hi = spec_.action_high[ju];
      if (a >= hi) a = std::nextafter(hi, lo);
      if (a <= lo) a = std::nextafter(lo, hi);
      s.action(i, j) = a;
      lp += -0.5 * eps * eps - ls - half_log_2pi - std::log(half_range_[ju]) -
            log_one_minus_tanh2(u);
    }
    s.log_prob(i) = lp;
  }
  return s;
}

void Policy::actor_backward(const ParamVector& params, const Matrix& features,
                            const ActorSample& s, const Vector& w_logp, const Matrix& g_action,
                            ParamVector& grad) const {
  const auto n = features.rows();
  const auto A = static_cast<Eigen::Index>(spec_.action_dim());
  Matrix out_grad(n, 2 * A);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < A; ++j) {
      const double t = s.squashed(i, j);
      const double sigma = std::exp(s.log_std(i, j));
      const double eps = s.noise(i, j);
      const double da_du = half_range_[static_cast<std::size_t>(j)] * (1.0 - t * t);
      const double dL_du = w_logp(i) * 2.0 * t + g_action(i, j) * da_du;
      out_grad(i, j) = dL_du;
      // log-std enters through u (via sigma * eps) and through -log sigma.
      const double dL_dls = dL_du * sigma * eps - w_logp(i);
      out_grad(i, A + j) =
          s.std_clamped[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ? 0.0 : dL_dls;
    }
  actor_.backward(params.segment(kActorSegment), s.cache, out_grad, grad.segment(kActorSegment),
                  false);
}

Matrix Policy::q_values(const ParamVector& params, const Matrix& features, const Matrix& action,
                        std::vector<ad::ForwardCache>* caches) const {
  const auto n = features.rows();
  if (action.rows() != n || static_cast<std::size_t>(action.cols()) != spec_.action_dim())
    throw ShapeError(ShapeError::npos, "action batch must be n x action_dim");
  Matrix in(n, features.cols() + action.cols());
  in << features, action;
  const auto cs = params.segment(kCriticSegment);
  const std::size_t pc = critic_.param_count();
  Matrix q(n, 2);
  if (caches) caches->clear();
  for (int k = 0; k < 2; ++k) {
    const auto ps = cs.subspan(static_cast<std::size_t>(k) * pc, pc);
    if (caches) {
      caches->push_back(critic_.forward_cached(ps, in));
      q.col(k) = caches->back().values.back().col(0);
    } else {
      q.col(k) = critic_.forward(ps, in).col(0);
    }
  }
  return q;
}

Matrix Policy::q_backward(const ParamVector& params, const std::vector<ad::ForwardCache>& caches,
                          const Matrix& q_grad, ParamVector* grad) const {
  const auto cs = params.segment(kCriticSegment);
  const std::size_t pc = critic_.param_count();
  Matrix in_grad;
  for (int k = 0; k < 2; ++k) {
    const auto ps = cs.subspan(static_cast<std::size_t>(k) * pc, pc);
    std::span<double> gs = grad ? grad->segment(kCriticSegment).subspan(static_cast<std::size_t>(k) * pc, pc)
                                : std::span<double>();
    const Matrix g = q_grad.col(k);
    Matrix gi = critic_.backward(ps, caches[static_cast<std::size_t>(k)], g, gs, true);
    if (k == 0) in_grad = std::move(gi);
    else in_grad += gi;
  }
  return in_grad;
}

std::vector<double> Policy::act(const ParamVector& params, const std::vector<double>& obs,
                                const lang::ContextPtr& context, bool deterministic,
                                std::mt19937_64& rng) const {
  const InputBatch in = make_input_batch({&obs}, {context}, spec_.d_lang);
  const Matrix f = encode(params, in);
  Matrix noise;
  if (!deterministic) {
    noise.resize(1, static_cast<Eigen::Index>(spec_.action_dim()));
    std::normal_distribution<double> g;
    for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(0, j) = g(rng);
  }
  const auto s = actor(params, f, noise);
  return {s.action.data(), s.action.data() + s.action.size()};
}

std::array<double, 2> Policy::q_value(const ParamVector& params, const std::vector<double>& obs,
                                      const lang::ContextPtr& context,
                                      const std::vector<double>& action) const {
  const InputBatch in = make_input_batch({&obs}, {context}, spec_.d_lang);
  const Matrix f = encode(params, in);
  Matrix a(1, static_cast<Eigen::Index>(action.size()));
  for (std::size_t j = 0; j < action.size(); ++j) a(0, static_cast<Eigen::Index>(j)) = action[j];
  const Matrix q = q_values(params, f, a);
  return {q(0, 0), q(0, 1)};
}

void save_policy(const std::filesystem::path& path, const PolicySpec& spec,
                 const ParamVector& params) {
  Policy(spec).check_layout(params);
  ad::save_checkpoint(path, ad::Checkpoint{spec.serialize(), params});
}

PolicySpec read_policy_spec(const std::filesystem::path& path) {
  return PolicySpec::parse(ad::load_checkpoint(path).header);
}

ParamVector load_policy(const std::filesystem::path& path, const PolicySpec& expected) {
  auto ck = ad::load_checkpoint(path);
  const PolicySpec stored = PolicySpec::parse(ck.header);
  if (!(stored == expected))
    throw Error("checkpoint spec mismatch: file has '" + ck.header + "', expected '" +
                expected.serialize() + "'");
  Policy(expected).check_layout(ck.params);
  return std::move(ck.params);
}

void soft_update(ParamVector& target, const ParamVector& online, double tau) {
  if (!target.same_layout(online)) throw LayoutError("soft_update: layouts differ");
  for (const char* name : {kLanguageSegment, kEncoderSegment, kCriticSegment}) {
    auto t = target.segment(name);
    const auto o = online.segment(name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
  }
}

}  // namespace toolmeta::policy
