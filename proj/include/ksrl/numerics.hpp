#ifndef KSRL_NUMERICS_HPP
#define KSRL_NUMERICS_HPP

#include <complex>
#include <cstdint>
#include <vector>

#include "ksrl/common.hpp"

namespace ksrl {

// Square real-valued image, row-major, pixel values nominally in [0, 1].
struct RealImage {
  int n = 0;
  std::vector<double> pix;  // n*n

  RealImage() = default;
  explicit RealImage(int n_) : n(n_), pix(static_cast<std::size_t>(n_) * n_, 0.0) {}

  double& at(int i, int j) { return pix[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return pix[static_cast<std::size_t>(i) * n + j]; }

  static RealImage constant(int n, double v) {
    RealImage img(n);
    for (auto& p : img.pix) p = v;
    return img;
  }

  double max_abs() const;
  double max_pixel() const;
  double l2_norm() const;
  bool finite() const;
};

// Square complex k-space matrix.
struct ComplexKSpace {
  int n = 0;
  std::vector<std::complex<double>> data;  // n*n row-major

  ComplexKSpace() = default;
  explicit ComplexKSpace(int n_) : n(n_), data(static_cast<std::size_t>(n_) * n_) {}

  std::complex<double>& at(int i, int j) { return data[static_cast<std::size_t>(i) * n + j]; }
  const std::complex<double>& at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * n + j];
  }

  double l2_norm() const;
  bool finite() const;
};

// Binary column-sampling mask: cols[j] == 1 means k-space column j is observed.
struct ColumnMask {
  int n = 0;
  std::vector<std::uint8_t> cols;

  ColumnMask() = default;
  explicit ColumnMask(int n_) : n(n_), cols(static_cast<std::size_t>(n_), 0) {}

  int sampled_count() const {
    int c = 0;
    for (auto v : cols) c += v;
    return c;
  }
  bool operator==(const ColumnMask& o) const { return n == o.n && cols == o.cols; }

  // packs into a bit pattern, usable as a map key for n <= 64
  std::uint64_t bits() const {
    std::uint64_t b = 0;
    for (int j = 0; j < n; ++j)
      if (cols[static_cast<std::size_t>(j)]) b |= (1ULL << j);
    return b;
  }
};

enum class MetricKind { kSsim, kNegMse };

// Similarity metric configuration. dynamic_range == 0 is the "derive from the
// ground truth" sentinel: call resolve_metric() before evaluating.
struct MetricConfig {
  MetricKind kind = MetricKind::kSsim;
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 0.0;
};

// Returns a copy with dynamic_range filled in from the target image's peak
// value when the config carries the auto sentinel.
MetricConfig resolve_metric(const MetricConfig& cfg, const RealImage& target);

// Unitary 2D DFT (1/sqrt(N) per axis), so ||dft2(x)||_2 == ||x||_2.
ComplexKSpace dft2(const RealImage& img);
ComplexKSpace idft2(const ComplexKSpace& ks);

// Magnitude of the inverse DFT of (partially observed) k-space.
RealImage zero_filled(const ComplexKSpace& ks);

ComplexKSpace apply_mask(const ComplexKSpace& ks, const ColumnMask& m);
ColumnMask mask_union(const ColumnMask& m, int action);

// Indices of the k centered low-frequency columns, in natural (unshifted) DFT
// coordinates. "Centered" is defined in fftshift coordinates: the columns
// whose shifted index is closest to the DC position N/2 (integer division),
// ties broken toward the lower shifted index.
std::vector<int> centered_low_freq_columns(int n, int k);

double similarity(const RealImage& xhat, const RealImage& x, const MetricConfig& cfg);

// d similarity / d xhat, same shape as xhat.
RealImage similarity_grad(const RealImage& xhat, const RealImage& x, const MetricConfig& cfg);

// 10*log10(range^2 / MSE); +infinity when the images coincide.
double psnr(const RealImage& xhat, const RealImage& x, double dynamic_range);

double neg_mse_similarity(const RealImage& xhat, const RealImage& x, double dynamic_range);

}  // namespace ksrl

#endif  // KSRL_NUMERICS_HPP
