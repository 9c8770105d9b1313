#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "protohead/config.hpp"
#include "protohead/model.hpp"

namespace protohead {

using SampleRefs = std::span<const TokenEmbeddingSample* const>;
using IndexSet = std::vector<std::size_t>;

struct LossBreakdown {
  double ce = 0.0;   // mean cross-entropy, or mean squared error in regression mode
  double coh = 0.0;  // mean cohesion term, >= 0
  double sep = 0.0;  // mean separation term, <= 0
  double total = 0.0;
  std::vector<IndexSet> selected_coh;  // per sample, K prototype indices
  std::vector<IndexSet> selected_sep;  // per sample, K indices (empty without other classes)
};

/// Gradient of the batch objective, one tensor per trainable field.
struct Gradients {
  Matrix w_psi;
  Vector b_psi;
  Vector w_nu;
  Matrix prototypes;
  Matrix w_h;

  static Gradients zeros_like(const HeadParameters& p);
  bool operator==(const Gradients&) const = default;
};

inline constexpr double kProbabilityFloor = 1e-300;

double loss_ce(std::span<const double> probs, std::uint32_t label);
double loss_mse(double prediction, double target);

/// Mean of the K largest same-class squared distances; ties to the lower index.
std::pair<double, IndexSet> loss_coh(std::span<const double> dist_sq, std::uint32_t label,
                                     std::span<const std::uint32_t> proto_class, std::size_t k);

/// Negated mean of the K smallest other-class squared distances; ties to the
/// lower index. Returns 0 with an empty selection when no other class exists.
std::pair<double, IndexSet> loss_sep(std::span<const double> dist_sq, std::uint32_t label,
                                     std::span<const std::uint32_t> proto_class, std::size_t k);

/// Batch-mean objective lambda0*ce + lambda1*coh + lambda2*sep.
LossBreakdown total_loss(SampleRefs samples, std::span<const ForwardTrace> traces, const HeadParameters& params,
                         const TrainConfig& config);

/// Forward every sample and evaluate total_loss.
LossBreakdown batch_objective(SampleRefs samples, const HeadParameters& params, const TrainConfig& config,
                              std::vector<ForwardTrace>* traces_out = nullptr);

/// Throws a consistency error if `trace` was not produced for these shapes.
void check_trace(const ForwardTrace& trace, const TokenEmbeddingSample& sample, const HeadParameters& params);

/// Serial reference backward pass: exact gradient of total_loss with the
/// top-K selections in `loss` held fixed. Embedding gradients are not formed.
Gradients backward(SampleRefs samples, std::span<const ForwardTrace> traces, const LossBreakdown& loss,
                   const HeadParameters& params, const TrainConfig& config);

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  double max_rel_error_half_step = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double step = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  /// Set when the check fails but the error shrinks markedly with a halved
  /// step, i.e. the finite-difference step is too coarse.
  bool truncation_dominated = false;

  double max_rel_error() const;
};

/// Relative error with a small absolute floor on the denominator.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central-difference check of `analytic` against the batch objective.
GradCheckReport grad_check(const HeadParameters& params, SampleRefs samples, const TrainConfig& config,
                           const Gradients& analytic, double step, double tolerance);
/// Same, with the analytic gradient computed by backward().
GradCheckReport grad_check(const HeadParameters& params, SampleRefs samples, const TrainConfig& config, double step,
                           double tolerance);

}  // namespace protohead
