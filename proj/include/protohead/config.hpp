#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "protohead/datastore.hpp"

namespace protohead {

enum class SimActivation : std::uint8_t {
  kLogRatio,    // log((d2 + 1) / (d2 + eps))
  kReciprocal,  // 1 / (1 + d2)
};

const char* to_string(SimActivation a);
SimActivation sim_activation_from_string(const std::string& s);
const char* to_string(TaskMode m);
TaskMode task_mode_from_string(const std::string& s);

struct TrainConfig {
  std::size_t num_prototypes = 10;  // N
  std::size_t top_k = 2;            // K
  double lambda0 = 0.3;             // cross-entropy (or MSE) weight
  double lambda1 = 0.35;            // cohesion weight
  double lambda2 = 0.35;            // separation weight
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  TaskMode mode = TaskMode::kClassification;
  SimActivation sim_activation = SimActivation::kLogRatio;
  double eps_sim = 1e-4;
  std::size_t attention_dim = 0;  // D_a; 0 means "same as D"
  bool shuffle = true;
  int threads = 1;
  bool keep_best_eval = false;  // also snapshot the best-eval epoch; analyses default to the final epoch

  /// Prototypes per class for a given class count.
  std::size_t per_class(std::size_t num_classes) const { return num_prototypes / num_classes; }
  std::size_t resolved_attention_dim(std::size_t dim) const { return attention_dim == 0 ? dim : attention_dim; }

  bool operator==(const TrainConfig&) const = default;
};

/// Checks the invariants that do not depend on data.
void validate_config(const TrainConfig& config);
/// Full check against a dataset shape (N divisible by |C|, K bounds, mode).
void validate_config(const TrainConfig& config, std::size_t dim, std::size_t num_classes);

nlohmann::json to_json(const TrainConfig& config);
/// Applies keys present in `j` on top of `base`; unknown keys are a config error.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace protohead
