#pragma once

// Batch kernels for the training hot path.
//
// Two execution paths share the per-sample local derivative computation:
//   * kSerial   - the reference: samples processed in order, gradients
//                 accumulated sample by sample.
//   * kParallel - OpenMP: per-sample forward and local derivatives fan out
//                 over samples, then gradient tensors are reduced in parallel
//                 over parameter rows, each coordinate summing samples in
//                 ascending batch order.
// Both perform the same floating-point operations in the same order for
// every coordinate, so their results are bit-identical for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "protohead/loss.hpp"
#include "protohead/model.hpp"

namespace protohead {

enum class ExecPolicy { kSerial, kParallel };

const char* to_string(ExecPolicy p);

/// Backpropagated quantities local to one sample, before accumulation into
/// parameter gradients.
struct SampleDerivatives {
  Vector d_logits;  // |C|
  Vector d_dist;    // N, d objective / d dist_sq_j
  Vector d_score;   // T, d objective / d nu_t
  Matrix d_pre;     // T x D_a, d objective / d (W_psi h_t + b_psi)
};

/// Local derivatives of one sample's contribution, scaled by `weight`
/// (1 / batch size for the batch-mean objective).
SampleDerivatives sample_derivatives(const TokenEmbeddingSample& sample, const ForwardTrace& trace,
                                     const IndexSet& selected_coh, const IndexSet& selected_sep,
                                     const HeadParameters& params, const TrainConfig& config, double weight);

/// Adds one sample's gradient contribution into `grads`.
void accumulate_sample(const TokenEmbeddingSample& sample, const ForwardTrace& trace, const SampleDerivatives& der,
                       const HeadParameters& params, Gradients& grads);

std::vector<ForwardTrace> forward_batch(SampleRefs samples, const HeadParameters& params, ExecPolicy policy);

Gradients backward_batch(SampleRefs samples, std::span<const ForwardTrace> traces, const LossBreakdown& loss,
                         const HeadParameters& params, const TrainConfig& config, ExecPolicy policy);

/// Pooled encodings for every sample of a dataset (rows follow sample order).
Matrix pooled_encodings(const Dataset& dataset, const HeadParameters& params, ExecPolicy policy);

/// Sets the OpenMP thread count when built with OpenMP; no-op otherwise.
void set_num_threads(int threads);
bool openmp_enabled();

}  // namespace protohead
