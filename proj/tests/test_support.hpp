#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <vector>

#include "protohead/config.hpp"
#include "protohead/loss.hpp"
#include "protohead/model.hpp"
#include "protohead/rng.hpp"

namespace protohead::testing {

inline TokenEmbeddingSample random_sample(Rng& rng, std::size_t dim, std::size_t t_count, std::uint32_t classes,
                                          std::uint64_t id = 0) {
  TokenEmbeddingSample s;
  s.sample_id = id;
  s.tokens = Matrix(t_count, dim);
  for (double& x : s.tokens.flat()) x = rng.normal();
  s.label = static_cast<std::uint32_t>(rng.index(classes));
  s.target = rng.normal();
  return s;
}

/// Initialized parameters with W_h jittered so no two rows coincide.
inline HeadParameters random_params(const TrainConfig& c, std::size_t dim, std::size_t classes, Rng& rng) {
  auto p = init_params(c, dim, classes, rng);
  for (double& x : p.w_h.flat()) x += rng.uniform(-0.5, 0.5);
  return p;
}

inline std::vector<const TokenEmbeddingSample*> refs(const std::vector<TokenEmbeddingSample>& samples) {
  std::vector<const TokenEmbeddingSample*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

inline TrainConfig small_config(TaskMode mode = TaskMode::kClassification,
                                SimActivation act = SimActivation::kLogRatio) {
  TrainConfig c;
  c.num_prototypes = 6;
  c.top_k = 2;
  c.mode = mode;
  c.sim_activation = act;
  return c;
}

}  // namespace protohead::testing
