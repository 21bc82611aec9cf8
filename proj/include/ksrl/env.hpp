#ifndef KSRL_ENV_HPP
#define KSRL_ENV_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ksrl/numerics.hpp"

namespace ksrl {

enum class RewardMode { kDense, kSparse };
enum class HorizonPreset { kBase, kLong, kCustom };

// Sampling-episode configuration. The horizon is always derived:
//   T = floor(N/accel) - floor(N/init_accel).
struct EnvConfig {
  int n = 16;
  double accel = 4.0;
  double init_accel = 8.0;
  HorizonPreset preset = HorizonPreset::kBase;
  double discount = 1.0;
  RewardMode reward_mode = RewardMode::kSparse;
  MetricConfig metric;

  int initial_count() const { return static_cast<int>(n / init_accel); }
  int target_count() const { return static_cast<int>(n / accel); }
  int horizon() const { return target_count() - initial_count(); }

  void validate() const;

  static EnvConfig base(int n, double accel);   // init_accel = 2 * accel
  static EnvConfig long_horizon(int n, double accel);  // init_accel = 8 * accel
};

// Cumulative sampling state: mask M_t, observation y_t = M_t (.) y, step t.
struct SamplingState {
  ColumnMask mask;
  ComplexKSpace observed;
  int step = 0;
};

struct Trajectory {
  std::vector<int> actions;          // a_0 .. a_{T-1}
  std::vector<double> rewards;       // r_1 .. r_T
  std::vector<SamplingState> states; // s_0 .. s_T
  RealImage terminal_recon;          // x_T
};

enum class HeuristicKind { kTerminal, kMixture };

// Heuristic sampling policy over masks: the initial low-frequency columns
// plus uniformly random distinct extra columns up to a target count. A
// mixture draws the target count from (target_counts, weights) first.
struct HeuristicPolicyCfg {
  HeuristicKind kind = HeuristicKind::kTerminal;
  std::vector<int> target_counts;
  std::vector<double> weights;  // mixture only; must sum to 1

  void validate(const EnvConfig& env) const;
};

// Probability distribution over the N column actions. Sampled columns always
// carry zero mass.
struct ActionDistribution {
  std::vector<double> probs;

  int sample(Rng& rng) const;
  int argmax() const;  // ties toward the lower index
  double entropy() const;
};

// Reconstructor handle. Calls are counted so episode cost audits can assert
// the exact per-mode reconstruction counts.
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;

  RealImage reconstruct(const ComplexKSpace& observed) const {
    ++calls_;
    return do_reconstruct(observed);
  }

  std::uint64_t calls() const { return calls_; }
  void reset_calls() const { calls_ = 0; }

 protected:
  virtual RealImage do_reconstruct(const ComplexKSpace& observed) const = 0;

 private:
  mutable std::uint64_t calls_ = 0;
};

class ZeroFilledReconstructor final : public Reconstructor {
 protected:
  RealImage do_reconstruct(const ComplexKSpace& observed) const override {
    return zero_filled(observed);
  }
};

class ConstantReconstructor final : public Reconstructor {
 public:
  explicit ConstantReconstructor(RealImage img) : img_(std::move(img)) {}

 protected:
  RealImage do_reconstruct(const ComplexKSpace&) const override { return img_; }

 private:
  RealImage img_;
};

// Sampler handle. For the dense-reward POMDP the environment feeds the policy
// the current reconstruction x_t; for the sparse-reward POMDP recon_image is
// null and the policy works from y_t alone.
class Policy {
 public:
  virtual ~Policy() = default;

  ActionDistribution distribution(const SamplingState& s, const RealImage* recon_image) const {
    ++calls_;
    return do_distribution(s, recon_image);
  }

  std::uint64_t calls() const { return calls_; }
  void reset_calls() const { calls_ = 0; }

 protected:
  virtual ActionDistribution do_distribution(const SamplingState& s,
                                             const RealImage* recon_image) const = 0;

 private:
  mutable std::uint64_t calls_ = 0;
};

// Uniform over the unsampled columns.
class UniformRandomPolicy final : public Policy {
 protected:
  ActionDistribution do_distribution(const SamplingState& s, const RealImage*) const override;
};

// Plays a fixed action sequence (by step index).
class FixedSequencePolicy final : public Policy {
 public:
  explicit FixedSequencePolicy(std::vector<int> actions) : actions_(std::move(actions)) {}

 protected:
  ActionDistribution do_distribution(const SamplingState& s, const RealImage*) const override;

 private:
  std::vector<int> actions_;
};

SamplingState init_state(const RealImage& x, const EnvConfig& cfg);

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

// One sampling episode over a fixed ground truth. Owns the full k-space and,
// in dense mode, the cached current reconstruction so that a dense episode
// costs exactly T+1 reconstructor calls and a sparse episode exactly 1.
class SamplingEnv {
 public:
  SamplingEnv(const RealImage& x, const EnvConfig& cfg, const Reconstructor& recon);

  const SamplingState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  int horizon() const { return horizon_; }
  bool done() const { return state_.step >= horizon_; }

  StepResult step(int action);

  // Dense mode only: the reconstruction of the current observation.
  const RealImage& current_recon() const;
  // Valid once done(): the terminal reconstruction x_T.
  const RealImage& terminal_recon() const;

  double initial_similarity() const;  // S(recon(y_0), x), dense mode

 private:
  const RealImage& x_;
  EnvConfig cfg_;
  const Reconstructor& recon_;
  MetricConfig metric_;
  ComplexKSpace full_kspace_;
  SamplingState state_;
  int horizon_;
  std::optional<RealImage> cached_recon_;
  double cached_sim_ = 0.0;
  double initial_sim_ = 0.0;
};

enum class ActionSelect { kSample, kArgmax };

Trajectory rollout(const Policy& policy, const RealImage& x, const EnvConfig& cfg,
                   const Reconstructor& recon, Rng& rng,
                   ActionSelect select = ActionSelect::kSample);

// Discounted return sum_t gamma^{t-1} r_t.
double episode_return(const Trajectory& traj, double gamma);

ColumnMask heuristic_sample(const HeuristicPolicyCfg& cfg, const EnvConfig& env, Rng& rng);

// One-step lookahead against the ground truth: argmax over unsampled columns
// of S(recon(masked y), x), ties toward the lower index. Costs one
// reconstructor call per unsampled candidate.
int greedy_oracle_step(const SamplingState& s, const RealImage& x, const Reconstructor& recon,
                       const EnvConfig& cfg);

// Policy adapter for the greedy oracle (needs ground-truth access).
class GreedyOraclePolicy final : public Policy {
 public:
  GreedyOraclePolicy(const RealImage& x, const Reconstructor& recon, const EnvConfig& cfg)
      : x_(x), recon_(recon), cfg_(cfg) {}

 protected:
  ActionDistribution do_distribution(const SamplingState& s, const RealImage*) const override;

 private:
  const RealImage& x_;
  const Reconstructor& recon_;
  EnvConfig cfg_;
};

}  // namespace ksrl

#endif  // KSRL_ENV_HPP
