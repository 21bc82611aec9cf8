#include "ksrl/env.hpp"

#include <algorithm>
#include <cmath>

namespace ksrl {

void EnvConfig::validate() const {
  if (n < 2) throw InvalidConfigError("env: n must be >= 2");
  if (accel <= 0.0 || init_accel <= 0.0) throw InvalidConfigError("env: accel must be positive");
  if (init_accel < accel) throw InvalidConfigError("env: init_accel must be >= accel");
  if (preset == HorizonPreset::kBase && std::abs(init_accel - 2.0 * accel) > 1e-12)
    throw InvalidConfigError("env: Base preset requires init_accel = 2*accel");
  if (preset == HorizonPreset::kLong && std::abs(init_accel - 8.0 * accel) > 1e-12)
    throw InvalidConfigError("env: Long preset requires init_accel = 8*accel");
  if (initial_count() < 1) throw InvalidConfigError("env: initial mask would be empty");
  if (horizon() < 1) throw InvalidConfigError("env: horizon must be >= 1");
  if (target_count() > n) throw InvalidConfigError("env: target count exceeds N");
  if (discount < 0.0 || discount > 1.0) throw InvalidConfigError("env: discount outside [0,1]");
}

EnvConfig EnvConfig::base(int n, double accel) {
  EnvConfig c;
  c.n = n;
  c.accel = accel;
  c.init_accel = 2.0 * accel;
  c.preset = HorizonPreset::kBase;
  return c;
}

EnvConfig EnvConfig::long_horizon(int n, double accel) {
  EnvConfig c;
  c.n = n;
  c.accel = accel;
  c.init_accel = 8.0 * accel;
  c.preset = HorizonPreset::kLong;
  return c;
}

void HeuristicPolicyCfg::validate(const EnvConfig& env) const {
  if (target_counts.empty()) throw InvalidConfigError("heuristic: no target counts");
  if (kind == HeuristicKind::kTerminal && target_counts.size() != 1)
    throw InvalidConfigError("heuristic: terminal policy takes exactly one target count");
  for (int t : target_counts) {
    if (t < env.initial_count())
      throw InvalidConfigError("heuristic: target count below the initial mask size");
    if (t > env.n) throw InvalidConfigError("heuristic: target count exceeds N");
  }
  if (kind == HeuristicKind::kMixture) {
    if (weights.size() != target_counts.size())
      throw InvalidConfigError("heuristic: weights/counts length mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw InvalidConfigError("heuristic: negative mixture weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw InvalidConfigError("heuristic: mixture weights must sum to 1");
  }
}

int ActionDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  if (last_positive < 0) throw NoActionError("sample: distribution has no mass");
  return last_positive;  // u landed in the round-off tail
}

int ActionDistribution::argmax() const {
  int best = -1;
  double bv = -1.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > bv) {
      bv = probs[i];
      best = static_cast<int>(i);
    }
  if (best < 0 || bv <= 0.0) throw NoActionError("argmax: distribution has no mass");
  return best;
}

double ActionDistribution::entropy() const {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

ActionDistribution UniformRandomPolicy::do_distribution(const SamplingState& s,
                                                        const RealImage*) const {
  ActionDistribution d;
  d.probs.assign(static_cast<std::size_t>(s.mask.n), 0.0);
  int free_count = 0;
  for (int j = 0; j < s.mask.n; ++j)
    if (!s.mask.cols[static_cast<std::size_t>(j)]) ++free_count;
  if (free_count == 0) throw NoActionError("uniform policy: mask fully sampled");
  for (int j = 0; j < s.mask.n; ++j)
    if (!s.mask.cols[static_cast<std::size_t>(j)])
      d.probs[static_cast<std::size_t>(j)] = 1.0 / free_count;
  return d;
}

ActionDistribution FixedSequencePolicy::do_distribution(const SamplingState& s,
                                                        const RealImage*) const {
  if (s.step < 0 || static_cast<std::size_t>(s.step) >= actions_.size())
    throw InvalidInputError("fixed policy: no action for this step");
  ActionDistribution d;
  d.probs.assign(static_cast<std::size_t>(s.mask.n), 0.0);
  d.probs[static_cast<std::size_t>(actions_[static_cast<std::size_t>(s.step)])] = 1.0;
  return d;
}

SamplingState init_state(const RealImage& x, const EnvConfig& cfg) {
  cfg.validate();
  if (x.n != cfg.n) throw InvalidInputError("init_state: image size does not match config");
  const int k = cfg.initial_count();
  SamplingState s;
  s.mask = ColumnMask(cfg.n);
  for (int c : centered_low_freq_columns(cfg.n, k)) s.mask.cols[static_cast<std::size_t>(c)] = 1;
  s.observed = apply_mask(dft2(x), s.mask);
  s.step = 0;
  return s;
}

SamplingEnv::SamplingEnv(const RealImage& x, const EnvConfig& cfg, const Reconstructor& recon)
    : x_(x), cfg_(cfg), recon_(recon) {
  cfg_.validate();
  metric_ = resolve_metric(cfg_.metric, x_);
  full_kspace_ = dft2(x_);
  state_.mask = ColumnMask(cfg_.n);
  for (int c : centered_low_freq_columns(cfg_.n, cfg_.initial_count()))
    state_.mask.cols[static_cast<std::size_t>(c)] = 1;
  state_.observed = apply_mask(full_kspace_, state_.mask);
  state_.step = 0;
  horizon_ = cfg_.horizon();
  if (cfg_.reward_mode == RewardMode::kDense) {
    cached_recon_ = recon_.reconstruct(state_.observed);
    cached_sim_ = similarity(*cached_recon_, x_, metric_);
    initial_sim_ = cached_sim_;
  }
}

StepResult SamplingEnv::step(int action) {
  if (done()) throw EpisodeFinishedError("step: episode already finished");
  if (action < 0 || action >= cfg_.n) throw InvalidInputError("step: action out of range");

  state_.mask = mask_union(state_.mask, action);
  // copy the newly observed column; previously observed entries never change
  for (int i = 0; i < cfg_.n; ++i) state_.observed.at(i, action) = full_kspace_.at(i, action);
  ++state_.step;

  StepResult res;
  res.done = state_.step >= horizon_;
  if (cfg_.reward_mode == RewardMode::kDense) {
    RealImage next = recon_.reconstruct(state_.observed);
    const double sim = similarity(next, x_, metric_);
    res.reward = sim - cached_sim_;
    cached_recon_ = std::move(next);
    cached_sim_ = sim;
  } else {
    if (res.done) {
      cached_recon_ = recon_.reconstruct(state_.observed);
      res.reward = similarity(*cached_recon_, x_, metric_);
    } else {
      res.reward = 0.0;
    }
  }
  return res;
}

const RealImage& SamplingEnv::current_recon() const {
  if (!cached_recon_) throw InvalidInputError("current_recon: no reconstruction available");
  return *cached_recon_;
}

const RealImage& SamplingEnv::terminal_recon() const {
  if (!done() || !cached_recon_)
    throw InvalidInputError("terminal_recon: episode not finished");
  return *cached_recon_;
}

double SamplingEnv::initial_similarity() const {
  if (cfg_.reward_mode != RewardMode::kDense)
    throw InvalidInputError("initial_similarity: dense mode only");
  return initial_sim_;
}

Trajectory rollout(const Policy& policy, const RealImage& x, const EnvConfig& cfg,
                   const Reconstructor& recon, Rng& rng, ActionSelect select) {
  SamplingEnv env(x, cfg, recon);
  Trajectory traj;
  traj.states.push_back(env.state());
  while (!env.done()) {
    const RealImage* policy_view =
        cfg.reward_mode == RewardMode::kDense ? &env.current_recon() : nullptr;
    const ActionDistribution dist = policy.distribution(env.state(), policy_view);
    const int action = select == ActionSelect::kSample ? dist.sample(rng) : dist.argmax();
    const StepResult res = env.step(action);
    traj.actions.push_back(action);
    traj.rewards.push_back(res.reward);
    traj.states.push_back(env.state());
  }
  traj.terminal_recon = env.terminal_recon();
  return traj;
}

double episode_return(const Trajectory& traj, double gamma) {
  double g = 0.0;
  double scale = 1.0;
  for (double r : traj.rewards) {
    g += scale * r;
    scale *= gamma;
  }
  return g;
}

ColumnMask heuristic_sample(const HeuristicPolicyCfg& cfg, const EnvConfig& env, Rng& rng) {
  cfg.validate(env);
  int target = cfg.target_counts.front();
  if (cfg.kind == HeuristicKind::kMixture) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.weights.size(); ++i) {
      acc += cfg.weights[i];
      if (u < acc) {
        target = cfg.target_counts[i];
        break;
      }
    }
  }
  ColumnMask m(env.n);
  for (int c : centered_low_freq_columns(env.n, env.initial_count()))
    m.cols[static_cast<std::size_t>(c)] = 1;
  while (m.sampled_count() < target) {
    std::vector<int> free_cols;
    for (int j = 0; j < env.n; ++j)
      if (!m.cols[static_cast<std::size_t>(j)]) free_cols.push_back(j);
    const int pick = free_cols[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(free_cols.size()) - 1))];
    m.cols[static_cast<std::size_t>(pick)] = 1;
  }
  return m;
}

int greedy_oracle_step(const SamplingState& s, const RealImage& x, const Reconstructor& recon,
                       const EnvConfig& cfg) {
  const MetricConfig metric = resolve_metric(cfg.metric, x);
  const ComplexKSpace full = dft2(x);
  int best = -1;
  double best_val = 0.0;
  for (int a = 0; a < cfg.n; ++a) {
    if (s.mask.cols[static_cast<std::size_t>(a)]) continue;
    const ComplexKSpace candidate = apply_mask(full, mask_union(s.mask, a));
    const double v = similarity(recon.reconstruct(candidate), x, metric);
    if (best < 0 || v > best_val) {
      best = a;
      best_val = v;
    }
  }
  if (best < 0) throw NoActionError("greedy_oracle_step: mask fully sampled");
  return best;
}

ActionDistribution GreedyOraclePolicy::do_distribution(const SamplingState& s,
                                                       const RealImage*) const {
  ActionDistribution d;
  d.probs.assign(static_cast<std::size_t>(s.mask.n), 0.0);
  d.probs[static_cast<std::size_t>(greedy_oracle_step(s, x_, recon_, cfg_))] = 1.0;
  return d;
}

}  // namespace ksrl
