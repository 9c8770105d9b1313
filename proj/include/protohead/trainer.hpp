#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protohead/config.hpp"
#include "protohead/datastore.hpp"
#include "protohead/kernels.hpp"
#include "protohead/model.hpp"
#include "protohead/numerics.hpp"

namespace protohead {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double ce = 0.0;        // MSE in regression mode
  double coh = 0.0;
  double sep = 0.0;
  double total = 0.0;
  double eval_metric = 0.0;  // accuracy, or MSE in regression mode

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool operator==(const TrainHistory&) const = default;
};

/// Adam buffers for each trainable tensor, in checkpoint order
/// (w_psi, b_psi, w_nu, prototypes, w_h).
using AdamStates = std::array<AdamState, 5>;

inline constexpr std::array<const char*, 5> kTensorOrder = {"w_psi", "b_psi", "w_nu", "prototypes", "w_h"};

/// Everything needed to continue training bit-exactly.
struct TrainerState {
  TrainConfig config;
  HeadParameters params;
  AdamStates adam;
  std::string rng_state;
  std::size_t epoch = 0;  // completed epochs

  bool operator==(const TrainerState&) const = default;
};

struct TrainOptions {
  ExecPolicy policy = ExecPolicy::kParallel;
  /// Written after every epoch and at the end when set.
  std::optional<std::filesystem::path> checkpoint_path;
  /// JSON-lines metrics log, one record per epoch, when set.
  std::optional<std::filesystem::path> metrics_path;
  /// Written whenever the eval metric improves, with config.keep_best_eval.
  std::optional<std::filesystem::path> best_checkpoint_path;
  /// Provenance record written as the first metrics line.
  nlohmann::json provenance;
};

struct TrainResult {
  TrainerState state;  // after the final epoch
  TrainHistory history;
  /// Earliest epoch with the best eval metric of this run, with
  /// config.keep_best_eval.
  std::optional<TrainerState> best;
  double best_eval_metric = 0.0;
};

/// Fresh state: parameters initialized from the seeded stream, Adam zeroed.
TrainerState initial_state(const TrainConfig& config, std::size_t dim, std::size_t num_classes);

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& eval_set,
                  const TrainOptions& options = {});

/// Continues from `state` until state.config.epochs epochs are complete.
TrainResult resume(TrainerState state, const Dataset& train_set, const Dataset& eval_set,
                   const TrainOptions& options = {});

struct EvalMetrics {
  std::size_t count = 0;
  double accuracy = 0.0;  // classification
  double mse = 0.0;       // regression
  double mean_ce = 0.0;   // classification
  std::vector<std::size_t> class_total;
  std::vector<std::size_t> class_correct;

  double primary() const noexcept { return class_total.empty() ? mse : accuracy; }
};

EvalMetrics evaluate(const HeadParameters& params, const Dataset& dataset, ExecPolicy policy = ExecPolicy::kParallel);

std::vector<std::uint8_t> encode_checkpoint(const TrainerState& state);
TrainerState decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kPlmcVersion = 1;

}  // namespace protohead
