#ifndef KSRL_ORACLE_HPP
#define KSRL_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ksrl/env.hpp"
#include "ksrl/models.hpp"

namespace ksrl {

// Tolerance for deciding that two masked observations are identical when
// forming belief groups (max abs difference over all entries).
inline constexpr double kObsGroupTol = 1e-9;

// All C(n, k) column masks with exactly k sampled columns, in ascending
// lexicographic order of the 0/1 vector.
std::vector<ColumnMask> enumerate_masks(int n, int k);

// Belief state: a mask plus the dataset indices whose observations under the
// mask are pairwise identical (within kObsGroupTol).
struct BeliefState {
  ColumnMask mask;
  std::vector<int> group;
};

// Piecewise-tabular reconstructor: one reconstruction per observation-
// equivalence group. Entries may be keyed by (mask, observation) or by the
// observation alone (the function-of-y embodiment used by mismatch_check).
class TabularReconstructor {
 public:
  struct Entry {
    std::uint64_t mask_bits = 0;  // ignored when keyed_by_mask is false
    ComplexKSpace obs;
    RealImage recon;
    double weight = 0.0;
  };

  bool keyed_by_mask = true;
  std::vector<Entry> entries;

  const RealImage* lookup(const ColumnMask& mask, const ComplexKSpace& obs) const;
};

// Closed-form best response under NEG_MSE for a fixed set of masks: for each
// mask and observation-equivalence group, the reconstruction is the mean of
// the group's ground-truth images.
TabularReconstructor best_response_reconstructor(const std::vector<RealImage>& data,
                                                 const std::vector<ColumnMask>& masks,
                                                 const MetricConfig& metric);

// Best response to a heuristic mask distribution, keyed by the observation
// alone: the reconstruction at each observation is the heuristic-weighted
// conditional mean over every (image, mask) context producing it.
TabularReconstructor best_response_to_heuristic(
    const std::vector<RealImage>& data,
    const std::vector<std::pair<ColumnMask, double>>& mask_weights, const MetricConfig& metric);

enum class ObservationMode { kPerImage, kBelief };

struct DpOptions {
  ObservationMode mode = ObservationMode::kBelief;

  // Non-terminal grouping key: null groups by the raw observation y_t; a
  // handle groups by the reconstruction image R(y_t) instead.
  const Reconstructor* policy_obs_recon = nullptr;

  enum class Terminal { kReconHandle, kTabular, kBestResponse };
  Terminal terminal = Terminal::kBestResponse;
  const Reconstructor* recon = nullptr;
  const TabularReconstructor* tabular = nullptr;

  // Overrides the env's centered initial mask when set.
  std::optional<ColumnMask> initial_mask;

  std::size_t max_states = 4'000'000;
};

// Exact optimal value by backward induction. PER_IMAGE maximizes per image
// with full knowledge (an upper bound on any realizable policy); BELIEF
// chooses one action per belief group, the exact optimum over observation-
// respecting adaptive policies. Actions range over unsampled columns, ties
// toward the lower index.
double dp_optimal_value(const std::vector<RealImage>& data, const EnvConfig& cfg,
                        const DpOptions& opts);

struct OptimalValueReport {
  double dense_sup = 0.0;
  double sparse_sup = 0.0;
  double gap = 0.0;
  bool holds = false;
};

// Desk-scale check of the dense-vs-sparse optimal-value inequality: the
// sparse side conditions on y_t, the dense side on R(y_t) (null handle =>
// zero-filled); both use the NEG_MSE best response at terminal states.
OptimalValueReport optimal_value_check(const std::vector<RealImage>& data, const EnvConfig& cfg,
                              const Reconstructor* dense_obs_recon = nullptr);

struct MismatchReport {
  double value_terminal_pretrain = 0.0;
  double value_mixture_pretrain = 0.0;
  bool holds = false;
};

// Distributional-mismatch direction: the belief-optimal sampler value with
// the best response to the terminal heuristic vs the best response to the
// uniform count mixture. Rejects point-mass terminal heuristics (the
// positivity assumption).
MismatchReport mismatch_check(const std::vector<RealImage>& data, const EnvConfig& cfg);

struct TerminalGradientReport {
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

// Frozen-trajectory estimator check: the analytic gradient of the averaged
// terminal similarity w.r.t. the reconstructor parameters vs central finite
// differences. max_coords == 0 checks every coordinate.
TerminalGradientReport terminal_gradient_check(const ReconParams& r, const Policy& policy,
                                 const std::vector<RealImage>& data, const EnvConfig& cfg,
                                 int n_traj, double h, Rng& rng, int max_coords = 0);

// ---------------------------------------------------------------------------
// Structured tiny datasets for the desk-scale checks. Images are built from
// vertical cosine components so every k-space column support (and hence every
// observation collision) is controlled exactly.
// ---------------------------------------------------------------------------

struct ComponentSpec {
  int freq = 1;                  // column pair {freq, n-freq}
  std::vector<double> profile;   // row profile, length n
  double amp = 0.1;
};

RealImage component_image(int n, double dc, const std::vector<ComponentSpec>& comps);

// Four images separable by adaptive two-step probing but not by any fixed
// two-column probe; gives optimal_value_check a strict gap under a constant
// intermediate reconstructor. n must be >= 6 and even.
std::vector<RealImage> make_adaptive_gap_dataset(int n, std::uint64_t seed);

// Four images with zero k-space columns arranged so that lower-count masks
// collide with terminal-count observations; exercises mismatch_check.
std::vector<RealImage> make_collision_dataset(int n, std::uint64_t seed);

// Random tiny dataset drawing per-frequency components from a shared pool so
// belief groups are usually nontrivial.
std::vector<RealImage> make_structured_dataset(int n, int count, std::uint64_t seed);

struct CostAuditReport {
  std::uint64_t policy_calls = 0;
  std::uint64_t recon_calls = 0;
  std::uint64_t expected_policy = 0;
  std::uint64_t expected_recon = 0;
  bool ok = false;
};

// Runs one episode and compares the observed handle-call counters against
// the per-mode inference cost formulas (sparse: T policy + 1 recon; dense:
// T policy + T+1 recon).
CostAuditReport cost_audit_episode(const Policy& policy, const Reconstructor& recon,
                                   const RealImage& x, const EnvConfig& cfg, Rng& rng);

struct GreedyCostAuditReport {
  std::uint64_t recon_calls = 0;
  std::uint64_t expected_corrected = 0;  // T(N - |M0|) - T(T-1)/2
  std::uint64_t uncorrected_expression = 0;    // T(N - (T-1)/2), no initial-mask term
  bool ok = false;
};

GreedyCostAuditReport cost_audit_greedy(const Reconstructor& recon, const RealImage& x,
                                        const EnvConfig& cfg);

}  // namespace ksrl

#endif  // KSRL_ORACLE_HPP
