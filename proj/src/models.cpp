#include "ksrl/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace ksrl {

namespace {

// Zero-padded "same" convolution. in: c_in x n x n, w: c_out x c_in x k x k.
void conv2d(const double* in, int c_in, const double* w, const double* b, int c_out, int n,
            int k, double* out) {
  const int p = k / 2;
  for (int co = 0; co < c_out; ++co) {
    double* o = out + static_cast<std::size_t>(co) * n * n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) o[static_cast<std::size_t>(i) * n + j] = b[co];
    for (int ci = 0; ci < c_in; ++ci) {
      const double* z = in + static_cast<std::size_t>(ci) * n * n;
      const double* ker =
          w + (static_cast<std::size_t>(co) * c_in + ci) * k * k;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int di = 0; di < k; ++di) {
            const int ii = i + di - p;
            if (ii < 0 || ii >= n) continue;
            for (int dj = 0; dj < k; ++dj) {
              const int jj = j + dj - p;
              if (jj < 0 || jj >= n) continue;
              acc += ker[static_cast<std::size_t>(di) * k + dj] *
                     z[static_cast<std::size_t>(ii) * n + jj];
            }
          }
          o[static_cast<std::size_t>(i) * n + j] += acc;
        }
      }
    }
  }
}

// Backward pass of conv2d: accumulates dw/db and (optionally) din.
void conv2d_backward(const double* in, int c_in, const double* w, int c_out, int n, int k,
                     const double* dout, double* dw, double* db, double* din) {
  const int p = k / 2;
  for (int co = 0; co < c_out; ++co) {
    const double* dO = dout + static_cast<std::size_t>(co) * n * n;
    double acc_b = 0.0;
    for (int i = 0; i < n * n; ++i) acc_b += dO[i];
    db[co] += acc_b;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* z = in + static_cast<std::size_t>(ci) * n * n;
      const double* ker = w + (static_cast<std::size_t>(co) * c_in + ci) * k * k;
      double* dker = dw + (static_cast<std::size_t>(co) * c_in + ci) * k * k;
      double* dz = din ? din + static_cast<std::size_t>(ci) * n * n : nullptr;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double g = dO[static_cast<std::size_t>(i) * n + j];
          if (g == 0.0) continue;
          for (int di = 0; di < k; ++di) {
            const int ii = i + di - p;
            if (ii < 0 || ii >= n) continue;
            for (int dj = 0; dj < k; ++dj) {
              const int jj = j + dj - p;
              if (jj < 0 || jj >= n) continue;
              dker[static_cast<std::size_t>(di) * k + dj] +=
                  g * z[static_cast<std::size_t>(ii) * n + jj];
              if (dz)
                dz[static_cast<std::size_t>(ii) * n + jj] +=
                    g * ker[static_cast<std::size_t>(di) * k + dj];
            }
          }
        }
      }
    }
  }
}

void check_finite(const std::vector<double>& v, const char* who) {
  for (double x : v)
    if (!std::isfinite(x)) throw TrainingDivergedError(std::string(who) + ": non-finite value");
}

constexpr char kCkptMagic[8] = {'K', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr std::uint32_t kKindPolicy = 1;
constexpr std::uint32_t kKindRecon = 2;

}  // namespace

PolicyParams PolicyParams::zeros(const PolicyLayout& layout) {
  PolicyParams p;
  p.layout = layout;
  p.w.assign(layout.total(), 0.0);
  return p;
}

PolicyParams PolicyParams::random(const PolicyLayout& layout, Rng& rng, double scale) {
  PolicyParams p = zeros(layout);
  for (auto& v : p.w) v = scale * rng.normal();
  return p;
}

ReconParams ReconParams::zeros(const ReconLayout& layout) {
  ReconParams p;
  p.layout = layout;
  p.w.assign(layout.total(), 0.0);
  return p;
}

ReconParams ReconParams::random(const ReconLayout& layout, Rng& rng, double scale) {
  ReconParams p = zeros(layout);
  for (auto& v : p.w) v = scale * rng.normal();
  return p;
}

PolicyForward policy_forward(const PolicyParams& p, const SamplingState& s, PolicyInput mode,
                             const RealImage* recon_image) {
  const PolicyLayout& L = p.layout;
  const int n = L.n, F = L.feat_channels, k = L.kernel, H = L.hidden;
  if (s.mask.n != n) throw InvalidInputError("policy_forward: state size mismatch");

  PolicyForward f;
  if (mode == PolicyInput::kReconImage) {
    if (!recon_image) throw InvalidInputError("policy_forward: recon image required");
    if (recon_image->n != n) throw InvalidInputError("policy_forward: recon image size mismatch");
    f.input = *recon_image;
  } else {
    f.input = zero_filled(s.observed);
  }

  f.feat_pre.assign(static_cast<std::size_t>(F) * n * n, 0.0);
  conv2d(f.input.pix.data(), 1, p.w.data() + L.feat_w(), p.w.data() + L.feat_b(), F, n, k,
         f.feat_pre.data());
  f.feat_act.resize(f.feat_pre.size());
  for (std::size_t i = 0; i < f.feat_pre.size(); ++i) f.feat_act[i] = std::tanh(f.feat_pre[i]);

  const std::size_t dim = L.concat_dim();
  f.concat.assign(dim, 0.0);
  const double inv_px = 1.0 / (static_cast<double>(n) * n);
  for (int c = 0; c < F; ++c) {
    double acc = 0.0;
    const double* a = f.feat_act.data() + static_cast<std::size_t>(c) * n * n;
    for (int i = 0; i < n * n; ++i) acc += a[i];
    f.concat[static_cast<std::size_t>(c)] = acc * inv_px;
  }
  for (int j = 0; j < n; ++j)
    f.concat[static_cast<std::size_t>(F) + j] = s.mask.cols[static_cast<std::size_t>(j)];

  auto dense = [&](std::size_t w_off, std::size_t b_off, int rows, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = p.w[b_off + static_cast<std::size_t>(r)];
      const double* wr = p.w.data() + w_off + static_cast<std::size_t>(r) * dim;
      for (std::size_t c = 0; c < dim; ++c) acc += wr[c] * f.concat[c];
      out[static_cast<std::size_t>(r)] = acc;
    }
  };

  std::vector<double> actor_pre, critic_pre;
  dense(L.actor_w1(), L.actor_b1(), H, actor_pre);
  f.actor_h.resize(actor_pre.size());
  for (std::size_t i = 0; i < actor_pre.size(); ++i) f.actor_h[i] = std::tanh(actor_pre[i]);

  f.logits.assign(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < n; ++r) {
    double acc = p.w[L.actor_b2() + static_cast<std::size_t>(r)];
    const double* wr = p.w.data() + L.actor_w2() + static_cast<std::size_t>(r) * H;
    for (int c = 0; c < H; ++c) acc += wr[c] * f.actor_h[static_cast<std::size_t>(c)];
    f.logits[static_cast<std::size_t>(r)] = acc;
  }
  // legality masking before normalization
  for (int j = 0; j < n; ++j)
    if (s.mask.cols[static_cast<std::size_t>(j)])
      f.logits[static_cast<std::size_t>(j)] = -std::numeric_limits<double>::infinity();

  double mx = -std::numeric_limits<double>::infinity();
  for (double v : f.logits) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw NoActionError("policy_forward: all columns sampled");
  f.dist.probs.assign(static_cast<std::size_t>(n), 0.0);
  double z = 0.0;
  for (int j = 0; j < n; ++j) {
    const double l = f.logits[static_cast<std::size_t>(j)];
    if (std::isfinite(l)) {
      f.dist.probs[static_cast<std::size_t>(j)] = std::exp(l - mx);
      z += f.dist.probs[static_cast<std::size_t>(j)];
    }
  }
  for (auto& q : f.dist.probs) q /= z;

  dense(L.critic_w1(), L.critic_b1(), H, critic_pre);
  f.critic_h.resize(critic_pre.size());
  for (std::size_t i = 0; i < critic_pre.size(); ++i) f.critic_h[i] = std::tanh(critic_pre[i]);
  double v = p.w[L.critic_b2()];
  for (int c = 0; c < H; ++c)
    v += p.w[L.critic_w2() + static_cast<std::size_t>(c)] * f.critic_h[static_cast<std::size_t>(c)];
  f.value = v;
  return f;
}

void policy_backward(const PolicyParams& p, const PolicyForward& fwd, int action,
                     double advantage, double value_target, double entropy_coef,
                     double value_coef, std::vector<double>& grad) {
  const PolicyLayout& L = p.layout;
  const int n = L.n, F = L.feat_channels, k = L.kernel, H = L.hidden;
  if (grad.size() != p.w.size()) throw InvalidInputError("policy_backward: grad size mismatch");
  if (action < 0 || action >= n) throw InvalidInputError("policy_backward: action out of range");
  const auto& probs = fwd.dist.probs;
  if (probs[static_cast<std::size_t>(action)] <= 0.0)
    throw InvalidInputError("policy_backward: action has zero probability");

  // d loss / d logits
  const double ent = fwd.dist.entropy();
  std::vector<double> dlogits(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const double pj = probs[static_cast<std::size_t>(j)];
    if (pj <= 0.0) continue;  // masked
    double g = -advantage * ((j == action ? 1.0 : 0.0) - pj);
    g += entropy_coef * pj * (std::log(pj) + ent);
    dlogits[static_cast<std::size_t>(j)] = g;
  }
  const double dvalue = 2.0 * value_coef * (fwd.value - value_target);

  const std::size_t dim = L.concat_dim();
  std::vector<double> dconcat(dim, 0.0);

  // actor head
  std::vector<double> dh(static_cast<std::size_t>(H), 0.0);
  for (int r = 0; r < n; ++r) {
    const double g = dlogits[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    grad[L.actor_b2() + static_cast<std::size_t>(r)] += g;
    const double* wr = p.w.data() + L.actor_w2() + static_cast<std::size_t>(r) * H;
    double* dwr = grad.data() + L.actor_w2() + static_cast<std::size_t>(r) * H;
    for (int c = 0; c < H; ++c) {
      dwr[c] += g * fwd.actor_h[static_cast<std::size_t>(c)];
      dh[static_cast<std::size_t>(c)] += g * wr[c];
    }
  }
  for (int r = 0; r < H; ++r) {
    const double hr = fwd.actor_h[static_cast<std::size_t>(r)];
    const double g = dh[static_cast<std::size_t>(r)] * (1.0 - hr * hr);
    if (g == 0.0) continue;
    grad[L.actor_b1() + static_cast<std::size_t>(r)] += g;
    const double* wr = p.w.data() + L.actor_w1() + static_cast<std::size_t>(r) * dim;
    double* dwr = grad.data() + L.actor_w1() + static_cast<std::size_t>(r) * dim;
    for (std::size_t c = 0; c < dim; ++c) {
      dwr[c] += g * fwd.concat[c];
      dconcat[c] += g * wr[c];
    }
  }

  // critic head
  if (dvalue != 0.0) {
    grad[L.critic_b2()] += dvalue;
    std::vector<double> dhc(static_cast<std::size_t>(H), 0.0);
    for (int c = 0; c < H; ++c) {
      grad[L.critic_w2() + static_cast<std::size_t>(c)] +=
          dvalue * fwd.critic_h[static_cast<std::size_t>(c)];
      dhc[static_cast<std::size_t>(c)] =
          dvalue * p.w[L.critic_w2() + static_cast<std::size_t>(c)];
    }
    for (int r = 0; r < H; ++r) {
      const double hr = fwd.critic_h[static_cast<std::size_t>(r)];
      const double g = dhc[static_cast<std::size_t>(r)] * (1.0 - hr * hr);
      grad[L.critic_b1() + static_cast<std::size_t>(r)] += g;
      const double* wr = p.w.data() + L.critic_w1() + static_cast<std::size_t>(r) * dim;
      double* dwr = grad.data() + L.critic_w1() + static_cast<std::size_t>(r) * dim;
      for (std::size_t c = 0; c < dim; ++c) {
        dwr[c] += g * fwd.concat[c];
        dconcat[c] += g * wr[c];
      }
    }
  }

  // feature extractor (mask inputs carry no parameters)
  const double inv_px = 1.0 / (static_cast<double>(n) * n);
  std::vector<double> dpre(static_cast<std::size_t>(F) * n * n, 0.0);
  for (int c = 0; c < F; ++c) {
    const double dpool = dconcat[static_cast<std::size_t>(c)] * inv_px;
    if (dpool == 0.0) continue;
    const double* act = fwd.feat_act.data() + static_cast<std::size_t>(c) * n * n;
    double* dp = dpre.data() + static_cast<std::size_t>(c) * n * n;
    for (int i = 0; i < n * n; ++i) dp[i] = dpool * (1.0 - act[i] * act[i]);
  }
  conv2d_backward(fwd.input.pix.data(), 1, p.w.data() + L.feat_w(), F, n, k, dpre.data(),
                  grad.data() + L.feat_w(), grad.data() + L.feat_b(), nullptr);
}

ReconForward recon_forward(const ReconParams& p, const ComplexKSpace& y) {
  const ReconLayout& L = p.layout;
  const int n = L.n, C = L.channels, k = L.kernel;
  if (y.n != n) throw InvalidInputError("recon_forward: k-space size mismatch");

  ReconForward f;
  f.zf = zero_filled(y);
  f.pre1.assign(static_cast<std::size_t>(C) * n * n, 0.0);
  conv2d(f.zf.pix.data(), 1, p.w.data() + L.conv1_w(), p.w.data() + L.conv1_b(), C, n, k,
         f.pre1.data());
  f.act1.resize(f.pre1.size());
  for (std::size_t i = 0; i < f.pre1.size(); ++i) f.act1[i] = std::tanh(f.pre1[i]);

  std::vector<double> res(static_cast<std::size_t>(n) * n, 0.0);
  conv2d(f.act1.data(), C, p.w.data() + L.conv2_w(), p.w.data() + L.conv2_b(), 1, n, k,
         res.data());
  f.output = f.zf;
  for (std::size_t i = 0; i < res.size(); ++i) f.output.pix[i] += res[i];
  return f;
}

void recon_backward(const ReconParams& p, const ReconForward& fwd, const RealImage& upstream,
                    std::vector<double>& grad) {
  const ReconLayout& L = p.layout;
  const int n = L.n, C = L.channels, k = L.kernel;
  if (grad.size() != p.w.size()) throw InvalidInputError("recon_backward: grad size mismatch");
  if (upstream.n != n) throw InvalidInputError("recon_backward: upstream size mismatch");

  std::vector<double> dact1(static_cast<std::size_t>(C) * n * n, 0.0);
  conv2d_backward(fwd.act1.data(), C, p.w.data() + L.conv2_w(), 1, n, k, upstream.pix.data(),
                  grad.data() + L.conv2_w(), grad.data() + L.conv2_b(), dact1.data());
  for (std::size_t i = 0; i < dact1.size(); ++i)
    dact1[i] *= 1.0 - fwd.act1[i] * fwd.act1[i];
  conv2d_backward(fwd.zf.pix.data(), 1, p.w.data() + L.conv1_w(), C, n, k, dact1.data(),
                  grad.data() + L.conv1_w(), grad.data() + L.conv1_b(), nullptr);
}

OptimizerState OptimizerState::create(std::size_t size, double lr) {
  OptimizerState s;
  s.m.assign(size, 0.0);
  s.v.assign(size, 0.0);
  s.lr = lr;
  return s;
}

void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidInputError("optimizer_step: shape mismatch");
  check_finite(grads, "optimizer_step");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

namespace {

void save_checkpoint_impl(std::uint32_t kind, const std::vector<std::uint32_t>& layout,
                          const std::vector<double>& w, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path);
  os.write(kCkptMagic, sizeof(kCkptMagic));
  write_u32(os, kCkptVersion);
  write_u32(os, kind);
  write_u32(os, static_cast<std::uint32_t>(layout.size()));
  std::uint64_t h = fnv1a64(kCkptMagic, sizeof(kCkptMagic));
  h = fnv1a64(&kCkptVersion, sizeof(kCkptVersion), h);
  h = fnv1a64(&kind, sizeof(kind), h);
  for (std::uint32_t v : layout) {
    write_u32(os, v);
    h = fnv1a64(&v, sizeof(v), h);
  }
  const std::uint64_t count = w.size();
  write_u64(os, count);
  h = fnv1a64(&count, sizeof(count), h);
  write_f64_array(os, w);
  h = fnv1a64(w.data(), w.size() * sizeof(double), h);
  write_u64(os, h);
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

void load_checkpoint_impl(std::uint32_t expect_kind, std::vector<std::uint32_t>& layout,
                          std::vector<double>& w, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kCkptVersion) throw IoError("checkpoint: unsupported version");
  const std::uint32_t kind = read_u32(is);
  if (kind != expect_kind) throw IoError("checkpoint: wrong model kind");
  const std::uint32_t nlay = read_u32(is);
  if (nlay > 16) throw IoError("checkpoint: corrupt layout");
  std::uint64_t h = fnv1a64(kCkptMagic, sizeof(kCkptMagic));
  h = fnv1a64(&version, sizeof(version), h);
  h = fnv1a64(&kind, sizeof(kind), h);
  layout.resize(nlay);
  for (auto& v : layout) {
    v = read_u32(is);
    h = fnv1a64(&v, sizeof(v), h);
  }
  const std::uint64_t count = read_u64(is);
  if (count > (1ULL << 32)) throw IoError("checkpoint: corrupt parameter count");
  h = fnv1a64(&count, sizeof(count), h);
  read_f64_array(is, w, count);
  h = fnv1a64(w.data(), w.size() * sizeof(double), h);
  const std::uint64_t stored = read_u64(is);
  if (stored != h) throw IoError("checkpoint: checksum mismatch in " + path);
}

}  // namespace

void save_policy_checkpoint(const PolicyParams& p, const std::string& path) {
  save_checkpoint_impl(kKindPolicy,
                       {static_cast<std::uint32_t>(p.layout.n),
                        static_cast<std::uint32_t>(p.layout.feat_channels),
                        static_cast<std::uint32_t>(p.layout.kernel),
                        static_cast<std::uint32_t>(p.layout.hidden)},
                       p.w, path);
}

PolicyParams load_policy_checkpoint(const std::string& path) {
  std::vector<std::uint32_t> layout;
  std::vector<double> w;
  load_checkpoint_impl(kKindPolicy, layout, w, path);
  if (layout.size() != 4) throw IoError("checkpoint: bad policy layout");
  PolicyParams p;
  p.layout.n = static_cast<int>(layout[0]);
  p.layout.feat_channels = static_cast<int>(layout[1]);
  p.layout.kernel = static_cast<int>(layout[2]);
  p.layout.hidden = static_cast<int>(layout[3]);
  if (w.size() != p.layout.total()) throw IoError("checkpoint: parameter count mismatch");
  p.w = std::move(w);
  return p;
}

void save_recon_checkpoint(const ReconParams& p, const std::string& path) {
  save_checkpoint_impl(kKindRecon,
                       {static_cast<std::uint32_t>(p.layout.n),
                        static_cast<std::uint32_t>(p.layout.channels),
                        static_cast<std::uint32_t>(p.layout.kernel)},
                       p.w, path);
}

ReconParams load_recon_checkpoint(const std::string& path) {
  std::vector<std::uint32_t> layout;
  std::vector<double> w;
  load_checkpoint_impl(kKindRecon, layout, w, path);
  if (layout.size() != 3) throw IoError("checkpoint: bad recon layout");
  ReconParams p;
  p.layout.n = static_cast<int>(layout[0]);
  p.layout.channels = static_cast<int>(layout[1]);
  p.layout.kernel = static_cast<int>(layout[2]);
  if (w.size() != p.layout.total()) throw IoError("checkpoint: parameter count mismatch");
  p.w = std::move(w);
  return p;
}

}  // namespace ksrl
