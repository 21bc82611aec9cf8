#include "ksrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ksrl {

namespace {

double obs_distance(const ComplexKSpace& a, const ComplexKSpace& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

double image_distance(const RealImage& a, const RealImage& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.pix.size(); ++i)
    worst = std::max(worst, std::abs(a.pix[i] - b.pix[i]));
  return worst;
}

RealImage group_mean(const std::vector<RealImage>& data, const std::vector<int>& group) {
  RealImage mean(data[static_cast<std::size_t>(group.front())].n);
  for (int i : group)
    for (std::size_t p = 0; p < mean.pix.size(); ++p)
      mean.pix[p] += data[static_cast<std::size_t>(i)].pix[p];
  for (auto& v : mean.pix) v /= static_cast<double>(group.size());
  return mean;
}

ColumnMask initial_mask_for(const EnvConfig& cfg, const DpOptions& opts) {
  if (opts.initial_mask) {
    if (opts.initial_mask->n != cfg.n)
      throw InvalidInputError("dp: initial mask size mismatch");
    return *opts.initial_mask;
  }
  ColumnMask m(cfg.n);
  for (int c : centered_low_freq_columns(cfg.n, cfg.initial_count()))
    m.cols[static_cast<std::size_t>(c)] = 1;
  return m;
}

struct DpContext {
  const std::vector<RealImage>& data;
  const EnvConfig& cfg;
  const DpOptions& opts;
  std::vector<ComplexKSpace> kspaces;
  MetricConfig metric;
  std::size_t states_visited = 0;

  DpContext(const std::vector<RealImage>& d, const EnvConfig& c, const DpOptions& o)
      : data(d), cfg(c), opts(o) {
    if (data.empty()) throw InvalidInputError("dp: empty dataset");
    kspaces.reserve(data.size());
    for (const auto& x : data) {
      if (x.n != cfg.n) throw InvalidInputError("dp: image size mismatch");
      kspaces.push_back(dft2(x));
    }
    metric = cfg.metric;
    if (opts.terminal == DpOptions::Terminal::kBestResponse) {
      if (metric.kind != MetricKind::kNegMse)
        throw UnsupportedMetricError("dp: best-response terminal requires the NEG_MSE metric");
      if (metric.dynamic_range <= 0.0)
        throw InvalidConfigError("dp: best-response terminal needs an explicit dynamic_range");
    }
    if (opts.terminal == DpOptions::Terminal::kReconHandle && opts.recon == nullptr)
      throw InvalidInputError("dp: terminal recon handle missing");
    if (opts.terminal == DpOptions::Terminal::kTabular && opts.tabular == nullptr)
      throw InvalidInputError("dp: tabular reconstructor missing");
  }

  void count_state() {
    if (++states_visited > opts.max_states)
      throw ResourceError("dp: state budget exceeded after " +
                          std::to_string(states_visited) + " states");
  }

  MetricConfig metric_for(int image) const {
    return resolve_metric(metric, data[static_cast<std::size_t>(image)]);
  }

  ComplexKSpace observation(int image, const ColumnMask& mask) const {
    return apply_mask(kspaces[static_cast<std::size_t>(image)], mask);
  }

  // Splits a group by the non-terminal policy observation key under `mask`.
  std::vector<std::vector<int>> split(const std::vector<int>& group,
                                      const ColumnMask& mask) const {
    std::vector<std::vector<int>> groups;
    if (opts.policy_obs_recon == nullptr) {
      std::vector<ComplexKSpace> reps;
      for (int i : group) {
        ComplexKSpace o = observation(i, mask);
        bool placed = false;
        for (std::size_t g = 0; g < groups.size(); ++g)
          if (obs_distance(o, reps[g]) <= kObsGroupTol) {
            groups[g].push_back(i);
            placed = true;
            break;
          }
        if (!placed) {
          groups.push_back({i});
          reps.push_back(std::move(o));
        }
      }
    } else {
      std::vector<RealImage> reps;
      for (int i : group) {
        RealImage key = opts.policy_obs_recon->reconstruct(observation(i, mask));
        bool placed = false;
        for (std::size_t g = 0; g < groups.size(); ++g)
          if (image_distance(key, reps[g]) <= kObsGroupTol) {
            groups[g].push_back(i);
            placed = true;
            break;
          }
        if (!placed) {
          groups.push_back({i});
          reps.push_back(std::move(key));
        }
      }
    }
    return groups;
  }

  // Observation-equivalence refinement by raw y (independent of the policy
  // key), used for terminal reconstruction values.
  std::vector<std::vector<int>> refine_by_obs(const std::vector<int>& group,
                                              const ColumnMask& mask) const {
    std::vector<std::vector<int>> groups;
    std::vector<ComplexKSpace> reps;
    for (int i : group) {
      ComplexKSpace o = observation(i, mask);
      bool placed = false;
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (obs_distance(o, reps[g]) <= kObsGroupTol) {
          groups[g].push_back(i);
          placed = true;
          break;
        }
      if (!placed) {
        groups.push_back({i});
        reps.push_back(std::move(o));
      }
    }
    return groups;
  }

  // Sum over the group of terminal similarities (not averaged).
  double terminal_sum(const std::vector<int>& group, const ColumnMask& mask) const {
    double total = 0.0;
    switch (opts.terminal) {
      case DpOptions::Terminal::kReconHandle:
        for (int i : group) {
          const RealImage rec = opts.recon->reconstruct(observation(i, mask));
          total += similarity(rec, data[static_cast<std::size_t>(i)], metric_for(i));
        }
        break;
      case DpOptions::Terminal::kBestResponse:
        for (const auto& sub : refine_by_obs(group, mask)) {
          const RealImage mean = group_mean(data, sub);
          for (int i : sub)
            total += neg_mse_similarity(mean, data[static_cast<std::size_t>(i)],
                                        metric.dynamic_range);
        }
        break;
      case DpOptions::Terminal::kTabular:
        for (const auto& sub : refine_by_obs(group, mask)) {
          const ComplexKSpace o = observation(sub.front(), mask);
          const RealImage* rec = opts.tabular->lookup(mask, o);
          if (!rec)
            throw InvalidInputError("dp: tabular reconstructor has no entry for a terminal state");
          for (int i : sub)
            total += similarity(*rec, data[static_cast<std::size_t>(i)], metric_for(i));
        }
        break;
    }
    return total;
  }

  // Belief recursion: summed (not averaged) optimal value over the group.
  double belief_value(const std::vector<int>& group, const ColumnMask& mask, int t) {
    count_state();
    if (t == cfg.horizon()) return terminal_sum(group, mask);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < cfg.n; ++a) {
      if (mask.cols[static_cast<std::size_t>(a)]) continue;
      const ColumnMask next = mask_union(mask, a);
      double v = 0.0;
      for (const auto& child : split(group, next)) v += belief_value(child, next, t + 1);
      best = std::max(best, v);
    }
    if (!std::isfinite(best)) throw NoActionError("dp: no unsampled column available");
    return best;
  }

  double per_image_value(int image, const ColumnMask& mask, int t) {
    count_state();
    if (t == cfg.horizon()) return terminal_sum({image}, mask);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < cfg.n; ++a) {
      if (mask.cols[static_cast<std::size_t>(a)]) continue;
      best = std::max(best, per_image_value(image, mask_union(mask, a), t + 1));
    }
    if (!std::isfinite(best)) throw NoActionError("dp: no unsampled column available");
    return best;
  }
};

}  // namespace

std::vector<ColumnMask> enumerate_masks(int n, int k) {
  if (k < 0 || k > n) throw InvalidInputError("enumerate_masks: k out of range");
  std::vector<ColumnMask> out;
  std::vector<std::uint8_t> v(static_cast<std::size_t>(n), 0);
  for (int i = n - k; i < n; ++i) v[static_cast<std::size_t>(i)] = 1;
  do {
    ColumnMask m(n);
    m.cols = v;
    out.push_back(std::move(m));
  } while (std::next_permutation(v.begin(), v.end()));
  return out;
}

const RealImage* TabularReconstructor::lookup(const ColumnMask& mask,
                                              const ComplexKSpace& obs) const {
  const std::uint64_t bits = mask.bits();
  for (const auto& e : entries) {
    if (keyed_by_mask && e.mask_bits != bits) continue;
    if (obs_distance(e.obs, obs) <= kObsGroupTol) return &e.recon;
  }
  return nullptr;
}

TabularReconstructor best_response_reconstructor(const std::vector<RealImage>& data,
                                                 const std::vector<ColumnMask>& masks,
                                                 const MetricConfig& metric) {
  if (metric.kind != MetricKind::kNegMse)
    throw UnsupportedMetricError(
        "best_response_reconstructor: closed form exists only for NEG_MSE");
  if (data.empty()) throw InvalidInputError("best_response_reconstructor: empty dataset");

  std::vector<ComplexKSpace> kspaces;
  kspaces.reserve(data.size());
  for (const auto& x : data) kspaces.push_back(dft2(x));

  TabularReconstructor table;
  table.keyed_by_mask = true;
  for (const auto& mask : masks) {
    std::vector<std::vector<int>> groups;
    std::vector<ComplexKSpace> reps;
    for (std::size_t i = 0; i < data.size(); ++i) {
      ComplexKSpace o = apply_mask(kspaces[i], mask);
      bool placed = false;
      for (std::size_t g = 0; g < groups.size(); ++g)
        if (obs_distance(o, reps[g]) <= kObsGroupTol) {
          groups[g].push_back(static_cast<int>(i));
          placed = true;
          break;
        }
      if (!placed) {
        groups.push_back({static_cast<int>(i)});
        reps.push_back(std::move(o));
      }
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
      TabularReconstructor::Entry e;
      e.mask_bits = mask.bits();
      e.obs = reps[g];
      e.recon = group_mean(data, groups[g]);
      e.weight = static_cast<double>(groups[g].size());
      table.entries.push_back(std::move(e));
    }
  }
  return table;
}

TabularReconstructor best_response_to_heuristic(
    const std::vector<RealImage>& data,
    const std::vector<std::pair<ColumnMask, double>>& mask_weights, const MetricConfig& metric) {
  if (metric.kind != MetricKind::kNegMse)
    throw UnsupportedMetricError("best_response_to_heuristic: closed form exists only for NEG_MSE");
  if (data.empty()) throw InvalidInputError("best_response_to_heuristic: empty dataset");

  std::vector<ComplexKSpace> kspaces;
  kspaces.reserve(data.size());
  for (const auto& x : data) kspaces.push_back(dft2(x));

  struct Acc {
    ComplexKSpace obs;
    RealImage xsum;
    double wsum = 0.0;
  };
  std::vector<Acc> accs;
  for (const auto& [mask, weight] : mask_weights) {
    if (weight <= 0.0) continue;
    for (std::size_t i = 0; i < data.size(); ++i) {
      ComplexKSpace o = apply_mask(kspaces[i], mask);
      Acc* hit = nullptr;
      for (auto& a : accs)
        if (obs_distance(a.obs, o) <= kObsGroupTol) {
          hit = &a;
          break;
        }
      if (!hit) {
        accs.push_back(Acc{std::move(o), RealImage(data[i].n), 0.0});
        hit = &accs.back();
      }
      hit->wsum += weight;
      for (std::size_t p = 0; p < hit->xsum.pix.size(); ++p)
        hit->xsum.pix[p] += weight * data[i].pix[p];
    }
  }

  TabularReconstructor table;
  table.keyed_by_mask = false;
  for (auto& a : accs) {
    TabularReconstructor::Entry e;
    e.obs = std::move(a.obs);
    e.recon = std::move(a.xsum);
    for (auto& v : e.recon.pix) v /= a.wsum;
    e.weight = a.wsum;
    table.entries.push_back(std::move(e));
  }
  return table;
}

double dp_optimal_value(const std::vector<RealImage>& data, const EnvConfig& cfg,
                        const DpOptions& opts) {
  // T = 0 is allowed here (value of the initial state, no maximization),
  // unlike in the sampling environment proper.
  if (cfg.n < 2) throw InvalidConfigError("dp: n must be >= 2");
  if (cfg.initial_count() < 1) throw InvalidConfigError("dp: initial mask would be empty");
  if (cfg.horizon() < 0 || cfg.target_count() > cfg.n)
    throw InvalidConfigError("dp: bad acceleration factors");
  DpContext ctx(data, cfg, opts);
  const ColumnMask m0 = initial_mask_for(cfg, opts);
  const double inv = 1.0 / static_cast<double>(data.size());

  if (opts.mode == ObservationMode::kPerImage) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      total += ctx.per_image_value(static_cast<int>(i), m0, 0);
    return total * inv;
  }

  std::vector<int> all(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) all[i] = static_cast<int>(i);
  double total = 0.0;
  for (const auto& g : ctx.split(all, m0)) total += ctx.belief_value(g, m0, 0);
  return total * inv;
}

OptimalValueReport optimal_value_check(const std::vector<RealImage>& data, const EnvConfig& cfg,
                              const Reconstructor* dense_obs_recon) {
  ZeroFilledReconstructor zf;
  if (dense_obs_recon == nullptr) dense_obs_recon = &zf;

  DpOptions sparse;
  sparse.mode = ObservationMode::kBelief;
  sparse.terminal = DpOptions::Terminal::kBestResponse;

  DpOptions dense = sparse;
  dense.policy_obs_recon = dense_obs_recon;

  OptimalValueReport rep;
  rep.sparse_sup = dp_optimal_value(data, cfg, sparse);
  rep.dense_sup = dp_optimal_value(data, cfg, dense);
  rep.gap = rep.sparse_sup - rep.dense_sup;
  rep.holds = rep.dense_sup <= rep.sparse_sup + 1e-12;
  return rep;
}

MismatchReport mismatch_check(const std::vector<RealImage>& data, const EnvConfig& cfg) {
  cfg.validate();
  const int k0 = cfg.initial_count();
  const int kT = cfg.target_count();

  ColumnMask m0(cfg.n);
  for (int c : centered_low_freq_columns(cfg.n, k0)) m0.cols[static_cast<std::size_t>(c)] = 1;

  // All masks of the given count containing M_0.
  auto masks_with_count = [&](int count) {
    std::vector<ColumnMask> out;
    std::vector<int> rest;
    for (int j = 0; j < cfg.n; ++j)
      if (!m0.cols[static_cast<std::size_t>(j)]) rest.push_back(j);
    const int extra = count - k0;
    for (const ColumnMask& sub : enumerate_masks(static_cast<int>(rest.size()), extra)) {
      ColumnMask m = m0;
      for (std::size_t r = 0; r < rest.size(); ++r)
        if (sub.cols[r]) m.cols[static_cast<std::size_t>(rest[r])] = 1;
      out.push_back(std::move(m));
    }
    return out;
  };

  const std::vector<ColumnMask> terminal_masks = masks_with_count(kT);
  if (terminal_masks.size() <= 1)
    throw InvalidConfigError(
        "mismatch_check: terminal heuristic is a point mass, positivity assumption violated");

  std::vector<std::pair<ColumnMask, double>> term_weights;
  for (const auto& m : terminal_masks)
    term_weights.emplace_back(m, 1.0 / static_cast<double>(terminal_masks.size()));

  // uniform mixture over counts |M_0| .. |M_0|+T
  std::vector<std::pair<ColumnMask, double>> mix_weights;
  const int n_counts = kT - k0 + 1;
  for (int count = k0; count <= kT; ++count) {
    const auto masks = masks_with_count(count);
    for (const auto& m : masks)
      mix_weights.emplace_back(
          m, 1.0 / (static_cast<double>(n_counts) * static_cast<double>(masks.size())));
  }

  const TabularReconstructor r_term = best_response_to_heuristic(data, term_weights, cfg.metric);
  const TabularReconstructor r_mix = best_response_to_heuristic(data, mix_weights, cfg.metric);

  DpOptions opts;
  opts.mode = ObservationMode::kBelief;
  opts.terminal = DpOptions::Terminal::kTabular;

  MismatchReport rep;
  opts.tabular = &r_term;
  rep.value_terminal_pretrain = dp_optimal_value(data, cfg, opts);
  opts.tabular = &r_mix;
  rep.value_mixture_pretrain = dp_optimal_value(data, cfg, opts);
  rep.holds = rep.value_terminal_pretrain >= rep.value_mixture_pretrain - 1e-12;
  return rep;
}

TerminalGradientReport terminal_gradient_check(const ReconParams& r, const Policy& policy,
                                 const std::vector<RealImage>& data, const EnvConfig& cfg,
                                 int n_traj, double h, Rng& rng, int max_coords) {
  if (cfg.reward_mode != RewardMode::kSparse)
    throw InvalidConfigError("terminal_gradient_check: sparse mode required");
  if (n_traj < 1) throw InvalidInputError("terminal_gradient_check: need at least one trajectory");

  // Freeze the trajectories. In the sparse POMDP the acquisition sequence
  // depends only on the policy and the image, so the terminal observations
  // fully describe them.
  ZeroFilledReconstructor zf;
  std::vector<int> images;
  std::vector<ComplexKSpace> terminal_obs;
  for (int t = 0; t < n_traj; ++t) {
    const int img = t % static_cast<int>(data.size());
    Rng traj_rng = rng.split(static_cast<std::uint64_t>(t));
    Trajectory traj = rollout(policy, data[static_cast<std::size_t>(img)], cfg, zf, traj_rng);
    images.push_back(img);
    terminal_obs.push_back(traj.states.back().observed);
  }

  auto objective = [&](const ReconParams& params) {
    double acc = 0.0;
    for (int t = 0; t < n_traj; ++t) {
      const RealImage& x = data[static_cast<std::size_t>(images[static_cast<std::size_t>(t)])];
      const MetricConfig metric = resolve_metric(cfg.metric, x);
      const ReconForward f = recon_forward(params, terminal_obs[static_cast<std::size_t>(t)]);
      acc += similarity(f.output, x, metric);
    }
    return acc / n_traj;
  };

  std::vector<double> grad(r.w.size(), 0.0);
  for (int t = 0; t < n_traj; ++t) {
    const RealImage& x = data[static_cast<std::size_t>(images[static_cast<std::size_t>(t)])];
    const MetricConfig metric = resolve_metric(cfg.metric, x);
    const ReconForward f = recon_forward(r, terminal_obs[static_cast<std::size_t>(t)]);
    const RealImage upstream = similarity_grad(f.output, x, metric);
    recon_backward(r, f, upstream, grad);
  }
  for (auto& g : grad) g /= n_traj;

  std::vector<std::size_t> coords;
  if (max_coords <= 0 || static_cast<std::size_t>(max_coords) >= r.w.size()) {
    coords.resize(r.w.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  } else {
    Rng pick = rng.split(0x434f4f5244ULL);
    for (int i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(r.w.size()) - 1)));
  }

  TerminalGradientReport rep;
  rep.coords_checked = static_cast<int>(coords.size());
  ReconParams probe = r;
  for (std::size_t c : coords) {
    const double orig = probe.w[c];
    probe.w[c] = orig + h;
    const double fp = objective(probe);
    probe.w[c] = orig - h;
    const double fm = objective(probe);
    probe.w[c] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[c]), 1e-6});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - grad[c]) / denom);
  }
  return rep;
}

RealImage component_image(int n, double dc, const std::vector<ComponentSpec>& comps) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  RealImage x(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = dc;
      for (const auto& c : comps)
        v += c.amp * c.profile[static_cast<std::size_t>(i)] *
             std::cos(kTwoPi * c.freq * j / n);
      x.at(i, j) = v;
    }
  return x;
}

namespace {

std::vector<double> random_profile(int n, Rng& rng) {
  std::vector<double> h(static_cast<std::size_t>(n));
  for (auto& v : h) v = rng.uniform(0.2, 1.0);
  return h;
}

}  // namespace

std::vector<RealImage> make_adaptive_gap_dataset(int n, std::uint64_t seed) {
  if (n < 6) throw InvalidInputError("make_adaptive_gap_dataset: n must be >= 6");
  Rng rng(seed);
  const std::vector<double> ha = random_profile(n, rng);
  const std::vector<double> hb = random_profile(n, rng);
  const std::vector<double> hb2 = random_profile(n, rng);
  const std::vector<double> hc = random_profile(n, rng);
  const std::vector<double> hc2 = random_profile(n, rng);
  std::vector<double> neg_ha = ha;
  for (auto& v : neg_ha) v = -v;

  const double dc = 0.5, amp = 0.12;
  // column A tags the family, B separates within {0,1}, C within {2,3};
  // every fixed two-column probe leaves one pair collided
  return {
      component_image(n, dc, {{1, ha, amp}, {2, hb, amp}, {3, hc, amp}}),
      component_image(n, dc, {{1, ha, amp}, {2, hb2, amp}, {3, hc, amp}}),
      component_image(n, dc, {{1, neg_ha, amp}, {2, hb, amp}, {3, hc, amp}}),
      component_image(n, dc, {{1, neg_ha, amp}, {2, hb, amp}, {3, hc2, amp}}),
  };
}

std::vector<RealImage> make_collision_dataset(int n, std::uint64_t seed) {
  if (n < 6) throw InvalidInputError("make_collision_dataset: n must be >= 6");
  Rng rng(seed);
  const std::vector<double> ha = random_profile(n, rng);
  const std::vector<double> hb = random_profile(n, rng);
  const std::vector<double> hc = random_profile(n, rng);
  const std::vector<double> ha2 = random_profile(n, rng);
  const double dc = 0.5;
  const double amp = 0.1 + 0.1 * rng.uniform();
  // absent components mean zero k-space columns, so low-count masks can
  // reproduce terminal-count observations
  return {
      component_image(n, dc, {{1, ha, amp}}),
      component_image(n, dc, {{1, ha, amp}, {3, hc, amp}}),
      component_image(n, dc, {{1, ha, amp}, {2, hb, amp}}),
      component_image(n, dc, {{1, ha2, amp}, {2, hb, amp}, {3, hc, amp}}),
  };
}

std::vector<RealImage> make_structured_dataset(int n, int count, std::uint64_t seed) {
  Rng rng(seed);
  const int n_freqs = n / 2;
  // two shared profiles per frequency; images draw from the pool or skip
  std::vector<std::vector<std::vector<double>>> pool(static_cast<std::size_t>(n_freqs));
  for (auto& p : pool) {
    p.push_back(random_profile(n, rng));
    p.push_back(random_profile(n, rng));
  }
  std::vector<RealImage> out;
  for (int i = 0; i < count; ++i) {
    std::vector<ComponentSpec> comps;
    for (int f = 1; f <= n_freqs; ++f) {
      const double u = rng.uniform();
      if (u < 0.4) continue;  // component absent: zero column pair
      ComponentSpec c;
      c.freq = f;
      c.profile = pool[static_cast<std::size_t>(f - 1)][u < 0.7 ? 0 : 1];
      c.amp = 0.12;
      comps.push_back(std::move(c));
    }
    out.push_back(component_image(n, 0.5, comps));
  }
  return out;
}

CostAuditReport cost_audit_episode(const Policy& policy, const Reconstructor& recon,
                                   const RealImage& x, const EnvConfig& cfg, Rng& rng) {
  policy.reset_calls();
  recon.reset_calls();
  rollout(policy, x, cfg, recon, rng);
  CostAuditReport rep;
  rep.policy_calls = policy.calls();
  rep.recon_calls = recon.calls();
  const auto T = static_cast<std::uint64_t>(cfg.horizon());
  rep.expected_policy = T;
  rep.expected_recon = cfg.reward_mode == RewardMode::kSparse ? 1 : T + 1;
  rep.ok = rep.policy_calls == rep.expected_policy && rep.recon_calls == rep.expected_recon;
  return rep;
}

GreedyCostAuditReport cost_audit_greedy(const Reconstructor& recon, const RealImage& x,
                                        const EnvConfig& cfg) {
  // Counts only the per-step candidate reconstructions, which is what the
  // inference-cost formula accounts for.
  recon.reset_calls();
  const ComplexKSpace full = dft2(x);
  SamplingState s = init_state(x, cfg);
  for (int t = 0; t < cfg.horizon(); ++t) {
    const int a = greedy_oracle_step(s, x, recon, cfg);
    s.mask = mask_union(s.mask, a);
    s.observed = apply_mask(full, s.mask);
    ++s.step;
  }
  GreedyCostAuditReport rep;
  rep.recon_calls = recon.calls();
  const std::uint64_t T = static_cast<std::uint64_t>(cfg.horizon());
  const std::uint64_t n = static_cast<std::uint64_t>(cfg.n);
  const std::uint64_t m0 = static_cast<std::uint64_t>(cfg.initial_count());
  rep.expected_corrected = T * (n - m0) - T * (T - 1) / 2;
  rep.uncorrected_expression = T * n - T * (T - 1) / 2;
  rep.ok = rep.recon_calls == rep.expected_corrected;
  return rep;
}

}  // namespace ksrl
