#ifndef KSRL_DATASET_HPP
#define KSRL_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ksrl/numerics.hpp"

namespace ksrl {

// Synthetic ellipse-phantom generator configuration. Piecewise-smooth
// phantoms concentrate k-space energy in low frequencies, which is the
// structure column sampling exploits.
struct PhantomConfig {
  int n = 32;
  int count = 64;
  int ellipses_min = 2;
  int ellipses_max = 6;
  double intensity_min = 0.2;
  double intensity_max = 0.9;
  double smooth_sigma = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct Dataset {
  int n = 0;
  std::vector<RealImage> images;
  std::vector<Split> splits;
  PhantomConfig provenance;

  std::vector<int> indices_of(Split s) const;
  std::vector<RealImage> images_of(Split s) const;
  std::uint64_t content_hash() const;
};

Dataset generate_phantoms(const PhantomConfig& cfg);

// Deterministic contiguous split assignment: first train_frac, then val_frac,
// rest test.
void assign_splits(Dataset& d, double train_frac, double val_frac);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ksrl

#endif  // KSRL_DATASET_HPP
