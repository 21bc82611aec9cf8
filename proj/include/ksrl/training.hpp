#ifndef KSRL_TRAINING_HPP
#define KSRL_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ksrl/dataset.hpp"
#include "ksrl/env.hpp"
#include "ksrl/models.hpp"

namespace ksrl {

struct TrainConfig {
  int batch_size = 8;
  int pretrain_iters = 400;      // reconstructor pretraining steps, n^(0)
  int retrain_iters = 150;       // on-policy reconstructor steps per round, n^(l)
  std::int64_t a2c_steps = 20000;  // environment steps per sampler-training phase
  int update_timestep = 0;       // A2C update window in env steps; 0 means T
  double lr_policy = 3e-4;
  double lr_recon = 3e-4;
  double lr_decay = 3.0;         // per-round decay in alternating training
  int alternations = 5;          // L
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int traj_per_image = 1;        // trajectories per image in on-policy retraining
  int policy_feat_channels = 4;
  int policy_hidden = 32;
  int recon_channels = 8;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_lr(double base, int round) const;  // base / lr_decay^round
};

struct EvalSummary {
  int episodes = 0;
  double mean_ssim = 0.0;
  double std_ssim = 0.0;
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
  std::vector<double> per_image_ssim;
  std::vector<double> per_image_psnr;
  std::uint64_t policy_calls = 0;
  std::uint64_t recon_calls = 0;
};

struct PhaseRecord {
  std::string phase;
  EvalSummary eval;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<double> loss_curve;    // reconstructor losses, in phase order
  std::vector<double> return_curve;  // mean A2C return per update window
  std::vector<PhaseRecord> phases;
  std::vector<double> lr_schedule;   // effective policy lr per round
  std::uint64_t policy_calls = 0;    // rollout handle calls across training
  std::uint64_t recon_calls = 0;
  std::uint64_t seed = 0;
};

// One pretraining run of the reconstructor against a heuristic mask
// distribution, minimizing -S on minibatches. Returns the final mean loss.
double pretrain_reconstructor(ReconParams& r, const HeuristicPolicyCfg& heuristic,
                              const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                              const TrainConfig& cfg, double lr, Rng& rng, TrainReport& report);

// Advantage actor-critic on the sampling POMDP with a frozen reconstructor.
// The reward mode (and hence the policy input view) comes from env_cfg.
void train_sampler_a2c(PolicyParams& p, const Reconstructor& recon,
                       const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                       const TrainConfig& cfg, double lr, Rng& rng, TrainReport& report);

// On-policy reconstructor retraining: minimize -S(R(y_T), x) over terminal
// observations produced by the frozen policy.
void retrain_reconstructor_on_policy(ReconParams& r, const PolicyParams& frozen_policy,
                                     const std::vector<RealImage>& images,
                                     const EnvConfig& env_cfg, const TrainConfig& cfg, int round,
                                     Rng& rng, TrainReport& report);

struct TrainedPair {
  PolicyParams policy;
  ReconParams recon;
  TrainReport report;
};

// Pretrain with the terminal heuristic, then train the sampler by A2C with
// the frozen reconstructor (sparse-reward mode).
TrainedPair l2s(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg);

// Alternating framework: pretrain, then L rounds of sampler training and
// on-policy reconstructor retraining with per-round learning-rate decay.
TrainedPair l2sr(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg);

// Dense-reward policy-gradient baseline: mixture-pretrained reconstructor,
// then A2C on the dense-reward POMDP.
TrainedPair baseline_dense(const Dataset& data, const EnvConfig& env_cfg, const TrainConfig& cfg);

// Greedy evaluation (argmax actions). Episodes cycle through the images.
EvalSummary evaluate(const Policy& policy, const Reconstructor& recon,
                     const std::vector<RealImage>& images, const EnvConfig& env_cfg,
                     int n_episodes, std::uint64_t seed);

std::uint64_t params_hash(const std::vector<double>& w);

}  // namespace ksrl

#endif  // KSRL_TRAINING_HPP
