#include "ksrl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ksrl {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void check_image(const RealImage& img, const char* who) {
  if (img.n < 2) throw InvalidInputError(std::string(who) + ": image width must be >= 2");
  if (img.pix.size() != static_cast<std::size_t>(img.n) * img.n)
    throw InvalidInputError(std::string(who) + ": image is not square");
  if (!img.finite()) throw InvalidInputError(std::string(who) + ": non-finite pixel");
}

void check_kspace(const ComplexKSpace& ks, const char* who) {
  if (ks.n < 2) throw InvalidInputError(std::string(who) + ": k-space width must be >= 2");
  if (ks.data.size() != static_cast<std::size_t>(ks.n) * ks.n)
    throw InvalidInputError(std::string(who) + ": k-space is not square");
  if (!ks.finite()) throw InvalidInputError(std::string(who) + ": non-finite entry");
}

// One unitary 1-D DFT pass over rows (sign = -1) or its inverse (sign = +1).
// Applied twice (once per axis) via transposition symmetry.
void dft_rows(std::vector<std::complex<double>>& a, int n, int sign) {
  std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double ang = sign * 2.0 * kPi * k / n;
    twiddle[static_cast<std::size_t>(k)] = {std::cos(ang), std::sin(ang)};
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<std::complex<double>> row(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto* base = a.data() + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        acc += base[j] * twiddle[static_cast<std::size_t>(k) * j % n];
      }
      row[static_cast<std::size_t>(k)] = acc * scale;
    }
    std::copy(row.begin(), row.end(), base);
  }
}

void transpose(std::vector<std::complex<double>>& a, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      std::swap(a[static_cast<std::size_t>(i) * n + j], a[static_cast<std::size_t>(j) * n + i]);
}

ComplexKSpace dft2_impl(std::vector<std::complex<double>> buf, int n, int sign) {
  dft_rows(buf, n, sign);   // along columns index (within each row)
  transpose(buf, n);
  dft_rows(buf, n, sign);   // along the other axis
  transpose(buf, n);
  ComplexKSpace out(n);
  out.data = std::move(buf);
  return out;
}

struct SsimTerms {
  double mux, muy, sxx, syy, sxy;
};

// Normalized Gaussian window weights, w x w.
std::vector<double> gaussian_window(int w, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(w) * w);
  const double c = (w - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      g[static_cast<std::size_t>(i) * w + j] = v;
      sum += v;
    }
  for (auto& v : g) v /= sum;
  return g;
}

void check_metric(const RealImage& xhat, const RealImage& x, const MetricConfig& cfg) {
  check_image(xhat, "similarity");
  check_image(x, "similarity");
  if (xhat.n != x.n) throw InvalidInputError("similarity: image sizes differ");
  if (cfg.dynamic_range <= 0.0)
    throw InvalidConfigError("similarity: dynamic_range must be positive (resolve_metric first)");
  if (cfg.kind == MetricKind::kSsim) {
    if (cfg.window < 1 || cfg.window % 2 == 0)
      throw InvalidConfigError("similarity: window must be odd and positive");
    if (cfg.window > x.n) throw InvalidConfigError("similarity: window larger than image");
    if (cfg.sigma <= 0.0) throw InvalidConfigError("similarity: sigma must be positive");
  }
}

}  // namespace

double RealImage::max_abs() const {
  double m = 0.0;
  for (double v : pix) m = std::max(m, std::abs(v));
  return m;
}

double RealImage::max_pixel() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : pix) m = std::max(m, v);
  return m;
}

double RealImage::l2_norm() const {
  double s = 0.0;
  for (double v : pix) s += v * v;
  return std::sqrt(s);
}

bool RealImage::finite() const {
  for (double v : pix)
    if (!std::isfinite(v)) return false;
  return true;
}

double ComplexKSpace::l2_norm() const {
  double s = 0.0;
  for (const auto& v : data) s += std::norm(v);
  return std::sqrt(s);
}

bool ComplexKSpace::finite() const {
  for (const auto& v : data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

MetricConfig resolve_metric(const MetricConfig& cfg, const RealImage& target) {
  MetricConfig out = cfg;
  if (out.dynamic_range <= 0.0) {
    const double peak = target.max_pixel();
    out.dynamic_range = peak > 0.0 ? peak : 1.0;
  }
  return out;
}

ComplexKSpace dft2(const RealImage& img) {
  check_image(img, "dft2");
  std::vector<std::complex<double>> buf(img.pix.size());
  for (std::size_t i = 0; i < img.pix.size(); ++i) buf[i] = {img.pix[i], 0.0};
  return dft2_impl(std::move(buf), img.n, -1);
}

ComplexKSpace idft2(const ComplexKSpace& ks) {
  check_kspace(ks, "idft2");
  return dft2_impl(ks.data, ks.n, +1);
}

RealImage zero_filled(const ComplexKSpace& ks) {
  const ComplexKSpace img = idft2(ks);
  RealImage out(ks.n);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.pix[i] = std::abs(img.data[i]);
  return out;
}

ComplexKSpace apply_mask(const ComplexKSpace& ks, const ColumnMask& m) {
  check_kspace(ks, "apply_mask");
  if (m.n != ks.n) throw InvalidInputError("apply_mask: mask/k-space size mismatch");
  ComplexKSpace out(ks.n);
  for (int i = 0; i < ks.n; ++i)
    for (int j = 0; j < ks.n; ++j)
      if (m.cols[static_cast<std::size_t>(j)]) out.at(i, j) = ks.at(i, j);
  return out;
}

ColumnMask mask_union(const ColumnMask& m, int action) {
  if (action < 0 || action >= m.n) throw InvalidInputError("mask_union: action out of range");
  ColumnMask out = m;
  out.cols[static_cast<std::size_t>(action)] = 1;
  return out;
}

std::vector<int> centered_low_freq_columns(int n, int k) {
  if (k < 1 || k > n) throw InvalidConfigError("centered_low_freq_columns: bad count");
  // sort shifted indices by (distance to DC slot, index), take k, map back
  const int center = n / 2;
  std::vector<int> shifted(static_cast<std::size_t>(n));
  std::iota(shifted.begin(), shifted.end(), 0);
  std::stable_sort(shifted.begin(), shifted.end(), [center](int a, int b) {
    const int da = std::abs(a - center), db = std::abs(b - center);
    if (da != db) return da < db;
    return a < b;
  });
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back((shifted[static_cast<std::size_t>(i)] + (n + 1) / 2) % n);
  std::sort(out.begin(), out.end());
  return out;
}

double neg_mse_similarity(const RealImage& xhat, const RealImage& x, double dynamic_range) {
  double mse = 0.0;
  for (std::size_t i = 0; i < x.pix.size(); ++i) {
    const double d = xhat.pix[i] - x.pix[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.pix.size());
  return 1.0 - mse / (dynamic_range * dynamic_range);
}

double similarity(const RealImage& xhat, const RealImage& x, const MetricConfig& cfg) {
  check_metric(xhat, x, cfg);
  if (cfg.kind == MetricKind::kNegMse)
    return neg_mse_similarity(xhat, x, cfg.dynamic_range);

  const int n = x.n, w = cfg.window;
  const auto g = gaussian_window(w, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const int m = n - w + 1;  // valid-region positions per axis

  double total = 0.0;
  for (int oi = 0; oi < m; ++oi) {
    for (int oj = 0; oj < m; ++oj) {
      double mux = 0, muy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double wt = g[static_cast<std::size_t>(i) * w + j];
          const double a = xhat.at(oi + i, oj + j);
          const double b = x.at(oi + i, oj + j);
          mux += wt * a;
          muy += wt * b;
          sxx += wt * a * a;
          syy += wt * b * b;
          sxy += wt * a * b;
        }
      sxx -= mux * mux;
      syy -= muy * muy;
      sxy -= mux * muy;
      const double num = (2.0 * mux * muy + c1) * (2.0 * sxy + c2);
      const double den = (mux * mux + muy * muy + c1) * (sxx + syy + c2);
      total += num / den;
    }
  }
  return total / (static_cast<double>(m) * m);
}

RealImage similarity_grad(const RealImage& xhat, const RealImage& x, const MetricConfig& cfg) {
  check_metric(xhat, x, cfg);
  const int n = x.n;
  RealImage grad(n);

  if (cfg.kind == MetricKind::kNegMse) {
    const double scale = 2.0 / (static_cast<double>(n) * n * cfg.dynamic_range * cfg.dynamic_range);
    for (std::size_t i = 0; i < grad.pix.size(); ++i)
      grad.pix[i] = scale * (x.pix[i] - xhat.pix[i]);
    return grad;
  }

  const int w = cfg.window;
  const auto g = gaussian_window(w, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  const int m = n - w + 1;
  const double inv_windows = 1.0 / (static_cast<double>(m) * m);

  for (int oi = 0; oi < m; ++oi) {
    for (int oj = 0; oj < m; ++oj) {
      double mux = 0, muy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double wt = g[static_cast<std::size_t>(i) * w + j];
          const double a = xhat.at(oi + i, oj + j);
          const double b = x.at(oi + i, oj + j);
          mux += wt * a;
          muy += wt * b;
          sxx += wt * a * a;
          syy += wt * b * b;
          sxy += wt * a * b;
        }
      sxx -= mux * mux;
      syy -= muy * muy;
      sxy -= mux * muy;
      const double a_t = 2.0 * mux * muy + c1;
      const double c_t = 2.0 * sxy + c2;
      const double b_t = mux * mux + muy * muy + c1;
      const double d_t = sxx + syy + c2;
      const double s_w = (a_t * c_t) / (b_t * d_t);
      const double inv_bd = 1.0 / (b_t * d_t);
      // dS/dx_i = 2*w_i/(B*D) * [ muy*C + A*(y_i - muy) - S*(mux*D + B*(x_i - mux)) ]
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const double wt = g[static_cast<std::size_t>(i) * w + j];
          const double a = xhat.at(oi + i, oj + j);
          const double b = x.at(oi + i, oj + j);
          const double d =
              2.0 * wt * inv_bd *
              (muy * c_t + a_t * (b - muy) - s_w * (mux * d_t + b_t * (a - mux)));
          grad.at(oi + i, oj + j) += d * inv_windows;
        }
    }
  }
  return grad;
}

double psnr(const RealImage& xhat, const RealImage& x, double dynamic_range) {
  if (xhat.n != x.n) throw InvalidInputError("psnr: image sizes differ");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.pix.size(); ++i) {
    const double d = xhat.pix[i] - x.pix[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.pix.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(dynamic_range * dynamic_range / mse);
}

}  // namespace ksrl
