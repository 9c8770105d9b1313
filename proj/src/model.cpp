#include "protohead/model.hpp"

#include <cmath>
#include <string>

#include "protohead/errors.hpp"
#include "protohead/rng.hpp"

namespace protohead {

void validate_params(const HeadParameters& p) {
  const std::size_t da = p.attention_dim();
  const std::size_t n_proto = p.num_prototypes();
  require(p.dim() >= 1 && da >= 1, ErrorKind::kDimension, "attention projection must be non-empty");
  require(p.b_psi.size() == da && p.w_nu.size() == da, ErrorKind::kDimension, "attention vectors must have length D_a");
  require(p.prototypes.cols() == p.dim(), ErrorKind::kDimension, "prototype width != D");
  require(p.proto_class.size() == n_proto, ErrorKind::kDimension, "proto_class length != N");
  require(p.w_h.rows() == n_proto && p.num_classes() >= 1, ErrorKind::kDimension, "W_h must be N x |C|");
  std::vector<std::size_t> counts(p.num_classes(), 0);
  for (auto c : p.proto_class) {
    require(c < p.num_classes(), ErrorKind::kValidation, "prototype class out of range");
    ++counts[c];
  }
  for (auto c : counts) require(c == counts.front(), ErrorKind::kValidation, "unequal prototypes per class");
}

HeadParameters init_params(const TrainConfig& config, std::size_t dim, std::size_t num_classes, Rng& rng) {
  validate_config(config, dim, num_classes);
  const std::size_t da = config.resolved_attention_dim(dim);
  const std::size_t n_proto = config.num_prototypes;
  const std::size_t per_class = config.per_class(num_classes);

  HeadParameters p;
  p.mode = config.mode;
  p.activation = config.sim_activation;
  p.eps_sim = config.eps_sim;

  // Draw order: W_psi, b_psi, W_nu, then prototypes.
  const double bound = 1.0 / std::sqrt(static_cast<double>(da));
  p.w_psi = Matrix(da, dim);
  for (double& x : p.w_psi.flat()) x = rng.uniform(-bound, bound);
  p.b_psi.resize(da);
  for (double& x : p.b_psi) x = rng.uniform(-bound, bound);
  p.w_nu.resize(da);
  for (double& x : p.w_nu) x = rng.uniform(-bound, bound);
  p.prototypes = Matrix(n_proto, dim);
  for (double& x : p.prototypes.flat()) x = rng.uniform01();

  p.proto_class.resize(n_proto);
  p.w_h = Matrix(n_proto, num_classes);
  for (std::size_t j = 0; j < n_proto; ++j) {
    p.proto_class[j] = static_cast<std::uint32_t>(j / per_class);
    for (std::size_t c = 0; c < num_classes; ++c) p.w_h(j, c) = (c == p.proto_class[j]) ? 1.0 : -0.5;
  }
  return p;
}

HeadParameters init_params(const TrainConfig& config, std::size_t dim, std::size_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  return init_params(config, dim, num_classes, rng);
}

double sim_act(double d2, SimActivation act, double eps_sim) {
  if (act == SimActivation::kLogRatio) return std::log((d2 + 1.0) / (d2 + eps_sim));
  return 1.0 / (1.0 + d2);
}

double sim_act_grad(double d2, SimActivation act, double eps_sim) {
  if (act == SimActivation::kLogRatio) return 1.0 / (d2 + 1.0) - 1.0 / (d2 + eps_sim);
  const double q = 1.0 + d2;
  return -1.0 / (q * q);
}

Attention attend(const Matrix& tokens, const HeadParameters& p) {
  require(tokens.cols() == p.dim(), ErrorKind::kDimension,
          "token width " + std::to_string(tokens.cols()) + " != model D " + std::to_string(p.dim()));
  require(tokens.rows() >= 1, ErrorKind::kDimension, "sample has no tokens");
  const std::size_t t_count = tokens.rows();
  const std::size_t da = p.attention_dim();
  const std::size_t dim = p.dim();

  Attention out;
  out.upsilon = Matrix(t_count, da);
  Vector scores(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto h = tokens.row(t);
    double score = 0.0;
    for (std::size_t a = 0; a < da; ++a) {
      const double u = std::tanh(dot(p.w_psi.row(a), h) + p.b_psi[a]);
      out.upsilon(t, a) = u;
      score += u * p.w_nu[a];
    }
    scores[t] = score;
  }
  out.alpha = softmax(scores);
  out.pooled.assign(dim, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto h = tokens.row(t);
    for (std::size_t d = 0; d < dim; ++d) out.pooled[d] += out.alpha[t] * h[d];
  }
  return out;
}

Similarity similarities(std::span<const double> pooled, const HeadParameters& p) {
  require(pooled.size() == p.dim(), ErrorKind::kDimension, "pooled encoding width != D");
  Similarity out;
  const std::size_t n_proto = p.num_prototypes();
  out.dist_sq.resize(n_proto);
  out.sim.resize(n_proto);
  for (std::size_t j = 0; j < n_proto; ++j) {
    out.dist_sq[j] = l2_distance_sq(pooled, p.prototypes.row(j));
    out.sim[j] = sim_act(out.dist_sq[j], p.activation, p.eps_sim);
  }
  return out;
}

Vector logits(std::span<const double> sim, const HeadParameters& p, std::span<const std::size_t> mask) {
  const std::size_t n_proto = p.num_prototypes();
  require(sim.size() == n_proto, ErrorKind::kDimension, "similarity vector length != N");
  std::vector<char> masked(n_proto, 0);
  for (auto j : mask) {
    require(j < n_proto, ErrorKind::kIndex, "mask index " + std::to_string(j) + " >= N " + std::to_string(n_proto));
    masked[j] = 1;
  }
  const std::size_t classes = p.num_classes();
  Vector z(classes, 0.0);
  for (std::size_t j = 0; j < n_proto; ++j) {
    if (masked[j]) continue;
    for (std::size_t c = 0; c < classes; ++c) z[c] += sim[j] * p.w_h(j, c);
  }
  return z;
}

ForwardTrace forward(const Matrix& tokens, const HeadParameters& p) {
  auto att = attend(tokens, p);
  auto sims = similarities(att.pooled, p);
  ForwardTrace tr;
  tr.alpha = std::move(att.alpha);
  tr.pooled = std::move(att.pooled);
  tr.upsilon = std::move(att.upsilon);
  tr.dist_sq = std::move(sims.dist_sq);
  tr.sim = std::move(sims.sim);
  tr.logits = logits(tr.sim, p);
  if (p.mode == TaskMode::kClassification) tr.probs = softmax(tr.logits);
  return tr;
}

std::size_t argmax(std::span<const double> v) {
  require(!v.empty(), ErrorKind::kDimension, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace protohead
