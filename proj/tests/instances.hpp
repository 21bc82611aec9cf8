#ifndef KSRL_TESTS_INSTANCES_HPP
#define KSRL_TESTS_INSTANCES_HPP

// Shared rigged instances for training and acceptance tests.

#include <cstdint>
#include <vector>

#include "ksrl/oracle.hpp"

namespace ksrl::testinst {

// Phantoms whose k-space energy outside the initial mask concentrates in the
// column pairs of the given frequencies. All images share the informative
// frequencies (with per-image profiles), so the optimal columns are common
// knowledge learnable by a sampler.
inline std::vector<RealImage> rigged_dataset(int n, const std::vector<int>& freqs, int count,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RealImage> out;
  for (int i = 0; i < count; ++i) {
    std::vector<ComponentSpec> comps;
    double amp = 0.35;
    for (int f : freqs) {
      ComponentSpec c;
      c.freq = f;
      c.profile.resize(static_cast<std::size_t>(n));
      for (auto& v : c.profile) v = rng.uniform(0.5, 1.0);
      c.amp = amp;
      amp *= 0.6;  // strictly ranked energies across the informative columns
      comps.push_back(std::move(c));
    }
    out.push_back(component_image(n, 0.5, comps));
  }
  return out;
}

}  // namespace ksrl::testinst

#endif  // KSRL_TESTS_INSTANCES_HPP
