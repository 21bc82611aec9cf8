#ifndef KSRL_MODELS_HPP
#define KSRL_MODELS_HPP

#include <string>
#include <vector>

#include "ksrl/env.hpp"
#include "ksrl/numerics.hpp"

namespace ksrl {

// ---------------------------------------------------------------------------
// Policy model: conv feature extractor + fully connected actor and critic.
// The extractor sees an image view of the state (|F^-1(y_t)| in sparse mode,
// the current reconstruction in dense mode); its pooled features are
// concatenated with the mask vector before the actor/critic heads. tanh is
// used throughout so finite-difference gradient checks stay clean.
// ---------------------------------------------------------------------------

struct PolicyLayout {
  int n = 16;
  int feat_channels = 4;
  int kernel = 3;
  int hidden = 32;

  std::size_t feat_w() const { return 0; }
  std::size_t feat_w_size() const {
    return static_cast<std::size_t>(feat_channels) * kernel * kernel;
  }
  std::size_t feat_b() const { return feat_w() + feat_w_size(); }
  std::size_t concat_dim() const { return static_cast<std::size_t>(feat_channels) + n; }
  std::size_t actor_w1() const { return feat_b() + feat_channels; }
  std::size_t actor_w1_size() const { return static_cast<std::size_t>(hidden) * concat_dim(); }
  std::size_t actor_b1() const { return actor_w1() + actor_w1_size(); }
  std::size_t actor_w2() const { return actor_b1() + hidden; }
  std::size_t actor_w2_size() const { return static_cast<std::size_t>(n) * hidden; }
  std::size_t actor_b2() const { return actor_w2() + actor_w2_size(); }
  std::size_t critic_w1() const { return actor_b2() + n; }
  std::size_t critic_b1() const { return critic_w1() + actor_w1_size(); }
  std::size_t critic_w2() const { return critic_b1() + hidden; }
  std::size_t critic_b2() const { return critic_w2() + hidden; }
  std::size_t total() const { return critic_b2() + 1; }

  bool operator==(const PolicyLayout& o) const = default;
};

struct PolicyParams {
  PolicyLayout layout;
  std::vector<double> w;

  static PolicyParams zeros(const PolicyLayout& layout);
  static PolicyParams random(const PolicyLayout& layout, Rng& rng, double scale = 0.1);
};

enum class PolicyInput { kObsKspace, kReconImage };

// Forward-pass record; keeps the activations needed by policy_backward.
struct PolicyForward {
  ActionDistribution dist;
  double value = 0.0;

  // caches
  RealImage input;
  std::vector<double> feat_pre, feat_act;  // F x n x n
  std::vector<double> concat;              // F + n
  std::vector<double> actor_h, critic_h;   // tanh(hidden)
  std::vector<double> logits;              // n, after masking
};

PolicyForward policy_forward(const PolicyParams& p, const SamplingState& s, PolicyInput mode,
                             const RealImage* recon_image = nullptr);

// Gradient of the per-step A2C loss
//   -advantage*log pi(a) + value_coef*(value - value_target)^2 - entropy_coef*H(pi)
// with respect to all policy parameters, accumulated into grad (same size).
void policy_backward(const PolicyParams& p, const PolicyForward& fwd, int action,
                     double advantage, double value_target, double entropy_coef,
                     double value_coef, std::vector<double>& grad);

// ---------------------------------------------------------------------------
// Reconstructor model: zero-filled input plus a learned two-layer conv
// residual, out = z + conv2(tanh(conv1(z))). Zero weights give exactly the
// zero-filled baseline.
// ---------------------------------------------------------------------------

struct ReconLayout {
  int n = 16;
  int channels = 8;
  int kernel = 3;

  std::size_t conv1_w() const { return 0; }
  std::size_t conv1_w_size() const {
    return static_cast<std::size_t>(channels) * kernel * kernel;
  }
  std::size_t conv1_b() const { return conv1_w_size(); }
  std::size_t conv2_w() const { return conv1_b() + channels; }
  std::size_t conv2_w_size() const { return conv1_w_size(); }
  std::size_t conv2_b() const { return conv2_w() + conv2_w_size(); }
  std::size_t total() const { return conv2_b() + 1; }

  bool operator==(const ReconLayout& o) const = default;
};

struct ReconParams {
  ReconLayout layout;
  std::vector<double> w;

  static ReconParams zeros(const ReconLayout& layout);
  static ReconParams random(const ReconLayout& layout, Rng& rng, double scale = 0.05);
};

struct ReconForward {
  RealImage output;
  // caches
  RealImage zf;
  std::vector<double> pre1, act1;  // C x n x n
};

ReconForward recon_forward(const ReconParams& p, const ComplexKSpace& y);

// Accumulates d(output)^T * upstream with respect to the parameters.
void recon_backward(const ReconParams& p, const ReconForward& fwd, const RealImage& upstream,
                    std::vector<double>& grad);

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer (Adam with bias correction).
// ---------------------------------------------------------------------------

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<double> m, v;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerState create(std::size_t size, double lr);
};

void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads);

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, layout, little-endian f64 payload, checksum.
// ---------------------------------------------------------------------------

void save_policy_checkpoint(const PolicyParams& p, const std::string& path);
PolicyParams load_policy_checkpoint(const std::string& path);
void save_recon_checkpoint(const ReconParams& p, const std::string& path);
ReconParams load_recon_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Handle adapters.
// ---------------------------------------------------------------------------

class NeuralPolicy final : public Policy {
 public:
  NeuralPolicy(PolicyParams params, PolicyInput mode)
      : params_(std::move(params)), mode_(mode) {}

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  PolicyInput mode() const { return mode_; }

 protected:
  ActionDistribution do_distribution(const SamplingState& s,
                                     const RealImage* recon_image) const override {
    return policy_forward(params_, s, mode_, recon_image).dist;
  }

 private:
  PolicyParams params_;
  PolicyInput mode_;
};

class NeuralReconstructor final : public Reconstructor {
 public:
  explicit NeuralReconstructor(ReconParams params) : params_(std::move(params)) {}

  const ReconParams& params() const { return params_; }
  ReconParams& params() { return params_; }

 protected:
  RealImage do_reconstruct(const ComplexKSpace& observed) const override {
    return recon_forward(params_, observed).output;
  }

 private:
  ReconParams params_;
};

}  // namespace ksrl

#endif  // KSRL_MODELS_HPP
