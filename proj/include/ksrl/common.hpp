#ifndef KSRL_COMMON_HPP
#define KSRL_COMMON_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksrl {

struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EpisodeFinishedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoActionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AuditFailureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG. All uniform doubles are built from raw 64-bit draws so
// that streams are reproducible independent of the standard library's
// distribution implementations. Child streams are derived from the root seed
// by the documented split rule: child_seed = splitmix64(seed ^ splitmix64(id)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    // xoshiro256** state expanded from the seed via splitmix64.
    std::uint64_t sm = seed;
    for (auto& word : s_) {
      sm = splitmix64(sm);
      word = sm;
    }
  }

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t stream_id) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream_id)));
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw InvalidInputError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return lo + static_cast<std::int64_t>(v % span);
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller on uniforms from this stream
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool have_cached_ = false;
  double cached_ = 0.0;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x00000100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::vector<double>& v,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(v.data(), v.size() * sizeof(double), h);
}

// Binary file helpers. Formats are defined little-endian; this codebase
// assumes an LE host.
static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_f64_array(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("unexpected end of file");
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("unexpected end of file");
  return v;
}
inline double read_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw IoError("unexpected end of file");
  return v;
}
inline void read_f64_array(std::istream& is, std::vector<double>& v, std::size_t count) {
  v.resize(count);
  if (!is.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(count * sizeof(double))))
    throw IoError("unexpected end of file");
}

}  // namespace ksrl

#endif  // KSRL_COMMON_HPP
