#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protohead/config.hpp"
#include "protohead/datastore.hpp"
#include "protohead/numerics.hpp"

namespace protohead {

class Rng;

/// All trainable tensors of the head plus the structural settings the forward
/// pass needs. Prototype j belongs to class j / n (contiguous class blocks).
struct HeadParameters {
  Matrix w_psi;  // D_a x D, token projection
  Vector b_psi;  // D_a
  Vector w_nu;   // D_a, attention scoring vector
  Matrix prototypes;                     // N x D
  std::vector<std::uint32_t> proto_class;  // N
  Matrix w_h;    // N x |C|, no bias

  TaskMode mode = TaskMode::kClassification;
  SimActivation activation = SimActivation::kLogRatio;
  double eps_sim = 1e-4;

  std::size_t dim() const noexcept { return w_psi.cols(); }
  std::size_t attention_dim() const noexcept { return w_psi.rows(); }
  std::size_t num_prototypes() const noexcept { return prototypes.rows(); }
  std::size_t num_classes() const noexcept { return w_h.cols(); }

  bool operator==(const HeadParameters&) const = default;
};

/// Shape and class-balance check.
void validate_params(const HeadParameters& params);

HeadParameters init_params(const TrainConfig& config, std::size_t dim, std::size_t num_classes, Rng& rng);
HeadParameters init_params(const TrainConfig& config, std::size_t dim, std::size_t num_classes, std::uint64_t seed);

struct Attention {
  Vector alpha;     // T
  Vector pooled;    // D, the attended encoding S
  Matrix upsilon;   // T x D_a, tanh activations (kept for backward)
};

struct Similarity {
  Vector dist_sq;  // N
  Vector sim;      // N, the prototypical-space embedding M
};

struct ForwardTrace {
  Vector alpha;
  Vector pooled;
  Matrix upsilon;
  Vector dist_sq;
  Vector sim;
  Vector logits;
  Vector probs;  // empty in regression mode
};

double sim_act(double dist_sq, SimActivation act, double eps_sim);
double sim_act_grad(double dist_sq, SimActivation act, double eps_sim);

Attention attend(const Matrix& tokens, const HeadParameters& params);
Similarity similarities(std::span<const double> pooled, const HeadParameters& params);

/// z_c = sum over j not in `mask` of M_j * W_h[j][c], summed in ascending j.
Vector logits(std::span<const double> sim, const HeadParameters& params, std::span<const std::size_t> mask = {});

ForwardTrace forward(const Matrix& tokens, const HeadParameters& params);
inline ForwardTrace forward(const TokenEmbeddingSample& sample, const HeadParameters& params) {
  return forward(sample.tokens, params);
}

std::size_t argmax(std::span<const double> v);

}  // namespace protohead
