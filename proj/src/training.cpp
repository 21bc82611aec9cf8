#include "ksrl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace ksrl {

namespace {

struct PhaseTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// rng stream ids, one per training phase
constexpr std::uint64_t kStreamReconInit = 0x7265636f6e5f30ULL;
constexpr std::uint64_t kStreamPolicyInit = 0x706f6c6963795fULL;
constexpr std::uint64_t kStreamPretrain = 0x70726574726e00ULL;
constexpr std::uint64_t kStreamA2c = 0x6132635f726f00ULL;

PolicyInput input_mode_for(const EnvConfig& env_cfg) {
  return env_cfg.reward_mode == RewardMode::kSparse ? PolicyInput::kObsKspace
                                                    : PolicyInput::kReconImage;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidConfigError("train: batch_size must be >= 1");
  if (pretrain_iters < 0 || retrain_iters < 0)
    throw InvalidConfigError("train: iteration counts must be >= 0");
  if (a2c_steps < 0) throw InvalidConfigError("train: a2c_steps must be >= 0");
  if (lr_policy < 0.0 || lr_recon < 0.0) throw InvalidConfigError("train: negative learning rate");
  if (lr_decay <= 0.0) throw InvalidConfigError("train: lr_decay must be positive");
  if (alternations < 0) throw InvalidConfigError("train: alternations must be >= 0");
  if (entropy_coef < 0.0 || value_coef < 0.0)
    throw InvalidConfigError("train: negative loss coefficient");
  if (traj_per_image < 1) throw InvalidConfigError("train: traj_per_image must be >= 1");
}

double TrainConfig::effective_lr(double base, int round) const {
  return base / std::pow(lr_decay, static_cast<double>(round));
}

std::uint64_t params_hash(const std::vector<double>& w) { return fnv1a64(w); }

double pretrain_reconstructor(ReconParams& r, const HeuristicPolicyCfg& heuristic,
                              const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                              const TrainConfig& cfg, double lr, Rng& rng, TrainReport& report) {
  cfg.validate();
  heuristic.validate(env_cfg);
  if (images.empty()) throw InvalidInputError("pretrain: empty image set");

  std::vector<ComplexKSpace> kspaces;
  kspaces.reserve(images.size());
  for (const auto& x : images) kspaces.push_back(dft2(x));

  OptimizerState opt = OptimizerState::create(r.w.size(), lr);
  std::vector<double> grad(r.w.size());
  double last_loss = 0.0;
  for (int iter = 0; iter < cfg.pretrain_iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx =
          static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
      const RealImage& x = images[static_cast<std::size_t>(idx)];
      const ColumnMask mask = heuristic_sample(heuristic, env_cfg, rng);
      const ComplexKSpace y = apply_mask(kspaces[static_cast<std::size_t>(idx)], mask);
      const MetricConfig metric = resolve_metric(env_cfg.metric, x);
      const ReconForward f = recon_forward(r, y);
      loss += -similarity(f.output, x, metric);
      RealImage upstream = similarity_grad(f.output, x, metric);
      const double scale = -1.0 / cfg.batch_size;
      for (auto& v : upstream.pix) v *= scale;
      recon_backward(r, f, upstream, grad);
    }
    loss /= cfg.batch_size;
    if (!std::isfinite(loss)) throw TrainingDivergedError("pretrain: non-finite loss");
    optimizer_step(opt, r.w, grad);
    report.loss_curve.push_back(loss);
    last_loss = loss;
  }
  return last_loss;
}

void train_sampler_a2c(PolicyParams& p, const Reconstructor& recon,
                       const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                       const TrainConfig& cfg, double lr, Rng& rng, TrainReport& report) {
  cfg.validate();
  env_cfg.validate();
  if (images.empty()) throw InvalidInputError("a2c: empty image set");

  const PolicyInput mode = input_mode_for(env_cfg);
  const int horizon = env_cfg.horizon();
  const int window = cfg.update_timestep > 0 ? cfg.update_timestep : horizon;
  const double gamma = env_cfg.discount;

  OptimizerState opt = OptimizerState::create(p.w.size(), lr);
  std::vector<double> grad(p.w.size(), 0.0);

  struct StepRecord {
    PolicyForward fwd;
    int action = 0;
    double ret = 0.0;  // discounted return-to-go from this step
  };
  std::vector<StepRecord> pending;
  double window_return = 0.0;
  int window_episodes = 0;

  std::int64_t steps_done = 0;
  while (steps_done < cfg.a2c_steps) {
    const int idx =
        static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
    const RealImage& x = images[static_cast<std::size_t>(idx)];
    SamplingEnv env(x, env_cfg, recon);

    std::vector<PolicyForward> fwds;
    std::vector<int> actions;
    std::vector<double> rewards;
    while (!env.done()) {
      const RealImage* view =
          mode == PolicyInput::kReconImage ? &env.current_recon() : nullptr;
      PolicyForward f = policy_forward(p, env.state(), mode, view);
      const int action = f.dist.sample(rng);
      const StepResult res = env.step(action);
      fwds.push_back(std::move(f));
      actions.push_back(action);
      rewards.push_back(res.reward);
    }
    steps_done += horizon;
    window_return += episode_return(Trajectory{actions, rewards, {}, {}}, gamma);
    ++window_episodes;

    // n-step discounted returns (episode ends; no bootstrap at the horizon)
    double running = 0.0;
    std::vector<double> returns(rewards.size());
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
      running = rewards[static_cast<std::size_t>(t)] + gamma * running;
      returns[static_cast<std::size_t>(t)] = running;
    }
    for (std::size_t t = 0; t < fwds.size(); ++t)
      pending.push_back(
          StepRecord{std::move(fwds[t]), actions[t], returns[t]});

    if (static_cast<int>(pending.size()) >= window) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const StepRecord& rec : pending) {
        const double advantage = rec.ret - rec.fwd.value;
        policy_backward(p, rec.fwd, rec.action, advantage, rec.ret, cfg.entropy_coef,
                        cfg.value_coef, grad);
      }
      const double inv = 1.0 / static_cast<double>(pending.size());
      for (auto& g : grad) g *= inv;
      optimizer_step(opt, p.w, grad);
      pending.clear();
      report.return_curve.push_back(window_return / window_episodes);
      window_return = 0.0;
      window_episodes = 0;
    }
  }
}

void retrain_reconstructor_on_policy(ReconParams& r, const PolicyParams& frozen_policy,
                                     const std::vector<RealImage>& images,
                                     const EnvConfig& env_cfg, const TrainConfig& cfg, int round,
                                     Rng& rng, TrainReport& report) {
  cfg.validate();
  if (env_cfg.reward_mode != RewardMode::kSparse)
    throw InvalidConfigError("retrain: sparse mode required");
  if (images.empty()) throw InvalidInputError("retrain: empty image set");

  const NeuralPolicy policy(frozen_policy, PolicyInput::kObsKspace);
  ZeroFilledReconstructor rollout_recon;  // terminal observations only
  const double lr = cfg.effective_lr(cfg.lr_recon, round);

  OptimizerState opt = OptimizerState::create(r.w.size(), lr);
  std::vector<double> grad(r.w.size());
  for (int iter = 0; iter < cfg.retrain_iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    const int samples = cfg.batch_size * cfg.traj_per_image;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx =
          static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
      const RealImage& x = images[static_cast<std::size_t>(idx)];
      const MetricConfig metric = resolve_metric(env_cfg.metric, x);
      for (int k = 0; k < cfg.traj_per_image; ++k) {
        const Trajectory traj = rollout(policy, x, env_cfg, rollout_recon, rng);
        const ComplexKSpace& terminal = traj.states.back().observed;
        const ReconForward f = recon_forward(r, terminal);
        loss += -similarity(f.output, x, metric);
        RealImage upstream = similarity_grad(f.output, x, metric);
        const double scale = -1.0 / samples;
        for (auto& v : upstream.pix) v *= scale;
        recon_backward(r, f, upstream, grad);
      }
    }
    loss /= samples;
    if (!std::isfinite(loss)) throw TrainingDivergedError("retrain: non-finite loss");
    optimizer_step(opt, r.w, grad);
    report.loss_curve.push_back(loss);
  }
}

EvalSummary evaluate(const Policy& policy, const Reconstructor& recon,
                     const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                     int n_episodes, std::uint64_t seed) {
  if (images.empty()) throw InvalidInputError("evaluate: empty image set");
  EvalSummary s;
  s.episodes = n_episodes;
  policy.reset_calls();
  recon.reset_calls();
  Rng rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    const RealImage& x = images[static_cast<std::size_t>(e) % images.size()];
    Rng episode_rng = rng.split(static_cast<std::uint64_t>(e));
    const Trajectory traj =
        rollout(policy, x, env_cfg, recon, episode_rng, ActionSelect::kArgmax);
    const MetricConfig metric = resolve_metric(env_cfg.metric, x);
    s.per_image_ssim.push_back(similarity(traj.terminal_recon, x, metric));
    s.per_image_psnr.push_back(psnr(traj.terminal_recon, x, metric.dynamic_range));
  }
  s.policy_calls = policy.calls();
  s.recon_calls = recon.calls();

  auto moments = [](const std::vector<double>& v, double& mean, double& stddev) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    stddev = std::sqrt(var / static_cast<double>(v.size()));
  };
  moments(s.per_image_ssim, s.mean_ssim, s.std_ssim);
  // PSNR can be +inf on exact recovery; clamp for the summary moments
  std::vector<double> capped = s.per_image_psnr;
  for (auto& v : capped) v = std::min(v, 200.0);
  moments(capped, s.mean_psnr, s.std_psnr);
  return s;
}

namespace {

EvalSummary eval_phase(const PolicyParams& p, const ReconParams& r, const Dataset& data,
                       const EnvConfig& env_cfg, std::uint64_t seed) {
  const NeuralPolicy policy(p, input_mode_for(env_cfg));
  const NeuralReconstructor recon(r);
  std::vector<RealImage> test = data.images_of(Split::kTest);
  if (test.empty()) test = data.images;
  return evaluate(policy, recon, test, env_cfg, static_cast<int>(test.size()), seed);
}

TrainedPair run_framework(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg,
                          bool alternating, bool dense_baseline) {
  cfg.validate();
  env_cfg.validate();

  Rng root(cfg.seed);
  PolicyLayout pl;
  pl.n = env_cfg.n;
  pl.feat_channels = cfg.policy_feat_channels;
  pl.hidden = cfg.policy_hidden;
  ReconLayout rl;
  rl.n = env_cfg.n;
  rl.channels = cfg.recon_channels;

  Rng recon_init = root.split(kStreamReconInit);
  Rng policy_init = root.split(kStreamPolicyInit);
  TrainedPair out{PolicyParams::random(pl, policy_init), ReconParams::random(rl, recon_init), {}};
  out.report.seed = cfg.seed;

  const std::vector<RealImage> train = data.images_of(Split::kTrain).empty()
                                           ? data.images
                                           : data.images_of(Split::kTrain);

  // reconstructor pretraining heuristic: terminal count for the sparse
  // frameworks, a uniform mixture over the covered counts for the dense
  // baseline
  HeuristicPolicyCfg heuristic;
  if (dense_baseline) {
    heuristic.kind = HeuristicKind::kMixture;
    for (int c = env_cfg.initial_count(); c <= env_cfg.target_count(); ++c)
      heuristic.target_counts.push_back(c);
    heuristic.weights.assign(heuristic.target_counts.size(),
                             1.0 / static_cast<double>(heuristic.target_counts.size()));
  } else {
    heuristic.kind = HeuristicKind::kTerminal;
    heuristic.target_counts = {env_cfg.target_count()};
  }

  {
    PhaseTimer timer;
    Rng rng = root.split(kStreamPretrain);
    pretrain_reconstructor(out.recon, heuristic, train, env_cfg, cfg, cfg.lr_recon, rng,
                           out.report);
    PhaseRecord rec;
    rec.phase = "pretrain";
    rec.eval = eval_phase(out.policy, out.recon, data, env_cfg, cfg.seed);
    rec.seconds = timer.seconds();
    out.report.policy_calls += rec.eval.policy_calls;
    out.report.recon_calls += rec.eval.recon_calls;
    out.report.phases.push_back(std::move(rec));
  }

  const int rounds = alternating ? cfg.alternations : 1;
  for (int round = 0; round < rounds; ++round) {
    const double lr_p = cfg.effective_lr(cfg.lr_policy, round);
    out.report.lr_schedule.push_back(lr_p);
    {
      PhaseTimer timer;
      const NeuralReconstructor frozen(out.recon);
      Rng rng = root.split(kStreamA2c + static_cast<std::uint64_t>(round));
      train_sampler_a2c(out.policy, frozen, train, env_cfg, cfg, lr_p, rng, out.report);
      PhaseRecord rec;
      rec.phase = "sampler_round" + std::to_string(round);
      rec.eval = eval_phase(out.policy, out.recon, data, env_cfg, cfg.seed);
      rec.seconds = timer.seconds();
      out.report.policy_calls += rec.eval.policy_calls;
      out.report.recon_calls += rec.eval.recon_calls;
      out.report.phases.push_back(std::move(rec));
    }
    if (alternating) {
      PhaseTimer timer;
      Rng rng = root.split(0x7265747261696eULL + static_cast<std::uint64_t>(round));
      retrain_reconstructor_on_policy(out.recon, out.policy, train, env_cfg, cfg, round, rng,
                                      out.report);
      PhaseRecord rec;
      rec.phase = "recon_round" + std::to_string(round);
      rec.eval = eval_phase(out.policy, out.recon, data, env_cfg, cfg.seed);
      rec.seconds = timer.seconds();
      out.report.policy_calls += rec.eval.policy_calls;
      out.report.recon_calls += rec.eval.recon_calls;
      out.report.phases.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace

TrainedPair l2s(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg) {
  EnvConfig sparse = env_cfg;
  sparse.reward_mode = RewardMode::kSparse;
  return run_framework(data, sparse, cfg, /*alternating=*/false, /*dense_baseline=*/false);
}

TrainedPair l2sr(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg) {
  EnvConfig sparse = env_cfg;
  sparse.reward_mode = RewardMode::kSparse;
  return run_framework(data, sparse, cfg, /*alternating=*/true, /*dense_baseline=*/false);
}

TrainedPair baseline_dense(const Dataset& data, const EnvConfig& env_cfg,
                           const TrainConfig& cfg) {
  EnvConfig dense = env_cfg;
  dense.reward_mode = RewardMode::kDense;
  return run_framework(data, dense, cfg, /*alternating=*/false, /*dense_baseline=*/true);
}

}  // namespace ksrl
