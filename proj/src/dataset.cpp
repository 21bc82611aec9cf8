#include "ksrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace ksrl {

namespace {

constexpr char kDataMagic[8] = {'K', 'S', 'R', 'L', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kDataVersion = 1;

void gaussian_blur_inplace(RealImage& img, double sigma) {
  if (sigma <= 0.0) return;
  const int n = img.n;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : kernel) v /= sum;

  RealImage tmp(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int jj = std::clamp(j + d, 0, n - 1);
        acc += kernel[static_cast<std::size_t>(d + radius)] * img.at(i, jj);
      }
      tmp.at(i, j) = acc;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int ii = std::clamp(i + d, 0, n - 1);
        acc += kernel[static_cast<std::size_t>(d + radius)] * tmp.at(ii, j);
      }
      img.at(i, j) = acc;
    }
}

RealImage render_phantom(const PhantomConfig& cfg, Rng& rng) {
  const int n = cfg.n;
  RealImage img(n);
  const int count =
      static_cast<int>(rng.uniform_int(cfg.ellipses_min, cfg.ellipses_max));
  for (int e = 0; e < count; ++e) {
    const double cx = rng.uniform(0.15, 0.85) * n;
    const double cy = rng.uniform(0.15, 0.85) * n;
    const double ra = rng.uniform(0.08, 0.35) * n;
    const double rb = rng.uniform(0.08, 0.35) * n;
    const double theta = rng.uniform(0.0, 3.141592653589793);
    const double intensity = rng.uniform(cfg.intensity_min, cfg.intensity_max);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double dx = i + 0.5 - cy;
        const double dy = j + 0.5 - cx;
        const double u = (dx * ct + dy * st) / ra;
        const double v = (-dx * st + dy * ct) / rb;
        if (u * u + v * v <= 1.0) img.at(i, j) += intensity;
      }
  }
  gaussian_blur_inplace(img, cfg.smooth_sigma);
  for (auto& p : img.pix) p = std::clamp(p, 0.0, 1.0);
  return img;
}

}  // namespace

void PhantomConfig::validate() const {
  if (n < 2) throw InvalidConfigError("phantom: n must be >= 2");
  if (count < 1) throw InvalidConfigError("phantom: count must be >= 1");
  if (ellipses_min < 0 || ellipses_max < ellipses_min)
    throw InvalidConfigError("phantom: bad ellipse count range");
  if (intensity_min < 0.0 || intensity_max > 1.0 || intensity_max < intensity_min)
    throw InvalidConfigError("phantom: intensity range must be within [0,1]");
  if (smooth_sigma < 0.0) throw InvalidConfigError("phantom: smooth_sigma must be >= 0");
}

std::vector<int> Dataset::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<RealImage> Dataset::images_of(Split s) const {
  std::vector<RealImage> out;
  for (int i : indices_of(s)) out.push_back(images[static_cast<std::size_t>(i)]);
  return out;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint32_t nn = static_cast<std::uint32_t>(n);
  h = fnv1a64(&nn, sizeof(nn), h);
  for (const auto& img : images) h = fnv1a64(img.pix, h);
  for (Split s : splits) {
    const auto v = static_cast<std::uint8_t>(s);
    h = fnv1a64(&v, sizeof(v), h);
  }
  return h;
}

Dataset generate_phantoms(const PhantomConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.n = cfg.n;
  d.provenance = cfg;
  Rng root(cfg.seed);
  for (int i = 0; i < cfg.count; ++i) {
    Rng image_rng = root.split(static_cast<std::uint64_t>(i));
    d.images.push_back(render_phantom(cfg, image_rng));
  }
  d.splits.assign(static_cast<std::size_t>(cfg.count), Split::kTrain);
  return d;
}

void assign_splits(Dataset& d, double train_frac, double val_frac) {
  if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0 + 1e-12)
    throw InvalidConfigError("assign_splits: fractions must be nonnegative and sum to <= 1");
  const auto count = static_cast<std::size_t>(d.images.size());
  const auto n_train = static_cast<std::size_t>(std::round(train_frac * count));
  const auto n_val = static_cast<std::size_t>(std::round(val_frac * count));
  d.splits.assign(count, Split::kTest);
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_train)
      d.splits[i] = Split::kTrain;
    else if (i < n_train + n_val)
      d.splits[i] = Split::kVal;
  }
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("dataset: cannot open " + path);

  std::uint64_t h = fnv1a64(kDataMagic, sizeof(kDataMagic));
  auto put_u32 = [&](std::uint32_t v) {
    write_u32(os, v);
    h = fnv1a64(&v, sizeof(v), h);
  };
  auto put_u64 = [&](std::uint64_t v) {
    write_u64(os, v);
    h = fnv1a64(&v, sizeof(v), h);
  };
  auto put_f64 = [&](double v) {
    write_f64(os, v);
    h = fnv1a64(&v, sizeof(v), h);
  };

  os.write(kDataMagic, sizeof(kDataMagic));
  put_u32(kDataVersion);
  put_u32(static_cast<std::uint32_t>(d.n));
  put_u32(static_cast<std::uint32_t>(d.images.size()));
  for (Split s : d.splits) {
    const char v = static_cast<char>(s);
    os.write(&v, 1);
    h = fnv1a64(&v, 1, h);
  }
  // provenance
  put_u32(static_cast<std::uint32_t>(d.provenance.n));
  put_u32(static_cast<std::uint32_t>(d.provenance.count));
  put_u32(static_cast<std::uint32_t>(d.provenance.ellipses_min));
  put_u32(static_cast<std::uint32_t>(d.provenance.ellipses_max));
  put_f64(d.provenance.intensity_min);
  put_f64(d.provenance.intensity_max);
  put_f64(d.provenance.smooth_sigma);
  put_u64(d.provenance.seed);
  for (const auto& img : d.images) {
    write_f64_array(os, img.pix);
    h = fnv1a64(img.pix, h);
  }
  write_u64(os, h);
  if (!os) throw IoError("dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("dataset: cannot open " + path);

  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kDataMagic, sizeof(magic)) != 0)
    throw IoError("dataset: bad magic in " + path);
  std::uint64_t h = fnv1a64(kDataMagic, sizeof(kDataMagic));
  auto get_u32 = [&]() {
    const std::uint32_t v = read_u32(is);
    h = fnv1a64(&v, sizeof(v), h);
    return v;
  };
  auto get_u64 = [&]() {
    const std::uint64_t v = read_u64(is);
    h = fnv1a64(&v, sizeof(v), h);
    return v;
  };
  auto get_f64 = [&]() {
    const double v = read_f64(is);
    h = fnv1a64(&v, sizeof(v), h);
    return v;
  };

  const std::uint32_t version = get_u32();
  if (version != kDataVersion) throw IoError("dataset: unsupported version");
  Dataset d;
  d.n = static_cast<int>(get_u32());
  const std::uint32_t count = get_u32();
  if (d.n < 2 || count > (1u << 24)) throw IoError("dataset: corrupt header");
  d.splits.resize(count);
  for (auto& s : d.splits) {
    char v;
    if (!is.read(&v, 1)) throw IoError("unexpected end of file");
    if (v < 0 || v > 2) throw IoError("dataset: corrupt split tag");
    s = static_cast<Split>(v);
    h = fnv1a64(&v, 1, h);
  }
  d.provenance.n = static_cast<int>(get_u32());
  d.provenance.count = static_cast<int>(get_u32());
  d.provenance.ellipses_min = static_cast<int>(get_u32());
  d.provenance.ellipses_max = static_cast<int>(get_u32());
  d.provenance.intensity_min = get_f64();
  d.provenance.intensity_max = get_f64();
  d.provenance.smooth_sigma = get_f64();
  d.provenance.seed = get_u64();
  d.images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RealImage img(d.n);
    read_f64_array(is, img.pix, static_cast<std::size_t>(d.n) * d.n);
    h = fnv1a64(img.pix, h);
    d.images.push_back(std::move(img));
  }
  const std::uint64_t stored = read_u64(is);
  if (stored != h) throw IoError("dataset: checksum mismatch in " + path);
  return d;
}

}  // namespace ksrl
