#pragma once

#include <cstddef>
#include <cstdint>

#include "protohead/datastore.hpp"

namespace protohead {

/// Synthetic token-embedding data: class c draws tokens from an isotropic
/// Gaussian around mu_c = (separation / sqrt 2) e_c, so every pair of class
/// means sits exactly `separation` apart.
struct SynthSpec {
  std::uint32_t classes = 2;
  std::size_t samples_per_class = 150;  // labels interleave 0, 1, ..., |C|-1
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 12;
  std::uint32_t dim = 16;
  double separation = 6.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  bool with_texts = false;
};

Dataset synth(const SynthSpec& spec);

/// First `count` samples and the rest, each renumbered from sample_id 0.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::size_t count);

}  // namespace protohead
