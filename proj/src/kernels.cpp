#include "protohead/kernels.hpp"

#include <cstdint>

#ifdef PROTOHEAD_HAVE_OPENMP
#include <omp.h>
#endif

#include "protohead/errors.hpp"

namespace protohead {

const char* to_string(ExecPolicy p) { return p == ExecPolicy::kSerial ? "serial" : "parallel"; }

void set_num_threads(int threads) {
#ifdef PROTOHEAD_HAVE_OPENMP
  if (threads >= 1) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

bool openmp_enabled() {
#ifdef PROTOHEAD_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

SampleDerivatives sample_derivatives(const TokenEmbeddingSample& sample, const ForwardTrace& tr,
                                     const IndexSet& selected_coh, const IndexSet& selected_sep,
                                     const HeadParameters& p, const TrainConfig& config, double weight) {
  const std::size_t classes = p.num_classes();
  const std::size_t n_proto = p.num_prototypes();
  const std::size_t t_count = sample.num_tokens();
  const std::size_t da = p.attention_dim();
  const std::size_t dim = p.dim();

  SampleDerivatives der;
  der.d_logits.assign(classes, 0.0);
  const double ce_weight = weight * config.lambda0;
  if (p.mode == TaskMode::kClassification) {
    for (std::size_t c = 0; c < classes; ++c) {
      der.d_logits[c] = ce_weight * (tr.probs[c] - (c == sample.label ? 1.0 : 0.0));
    }
  } else {
    der.d_logits[0] = ce_weight * 2.0 * (tr.logits[0] - sample.target);
  }

  der.d_dist.assign(n_proto, 0.0);
  for (std::size_t j = 0; j < n_proto; ++j) {
    double d_sim = 0.0;
    for (std::size_t c = 0; c < classes; ++c) d_sim += p.w_h(j, c) * der.d_logits[c];
    der.d_dist[j] = d_sim * sim_act_grad(tr.dist_sq[j], p.activation, p.eps_sim);
  }
  const double k = static_cast<double>(config.top_k);
  for (auto j : selected_coh) der.d_dist[j] += weight * config.lambda1 / k;
  for (auto j : selected_sep) der.d_dist[j] -= weight * config.lambda2 / k;

  // d/dS of sum_j d_dist_j * |S - p_j|^2
  Vector d_pooled(dim, 0.0);
  for (std::size_t j = 0; j < n_proto; ++j) {
    if (der.d_dist[j] == 0.0) continue;
    const auto pj = p.prototypes.row(j);
    for (std::size_t d = 0; d < dim; ++d) d_pooled[d] += 2.0 * (tr.pooled[d] - pj[d]) * der.d_dist[j];
  }

  // S = sum_t alpha_t h_t, alpha = softmax(nu)
  Vector d_alpha(t_count, 0.0);
  double weighted = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    d_alpha[t] = dot(sample.tokens.row(t), d_pooled);
    weighted += tr.alpha[t] * d_alpha[t];
  }
  der.d_score.assign(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t) der.d_score[t] = tr.alpha[t] * (d_alpha[t] - weighted);

  der.d_pre = Matrix(t_count, da);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t a = 0; a < da; ++a) {
      const double u = tr.upsilon(t, a);
      der.d_pre(t, a) = p.w_nu[a] * der.d_score[t] * (1.0 - u * u);
    }
  }
  return der;
}

void accumulate_sample(const TokenEmbeddingSample& sample, const ForwardTrace& tr, const SampleDerivatives& der,
                       const HeadParameters& p, Gradients& g) {
  const std::size_t classes = p.num_classes();
  const std::size_t n_proto = p.num_prototypes();
  const std::size_t t_count = sample.num_tokens();
  const std::size_t da = p.attention_dim();
  const std::size_t dim = p.dim();

  for (std::size_t j = 0; j < n_proto; ++j) {
    for (std::size_t c = 0; c < classes; ++c) g.w_h(j, c) += tr.sim[j] * der.d_logits[c];
  }
  for (std::size_t j = 0; j < n_proto; ++j) {
    const auto pj = p.prototypes.row(j);
    for (std::size_t d = 0; d < dim; ++d) g.prototypes(j, d) += -2.0 * (tr.pooled[d] - pj[d]) * der.d_dist[j];
  }
  for (std::size_t a = 0; a < da; ++a) {
    for (std::size_t t = 0; t < t_count; ++t) {
      g.w_nu[a] += tr.upsilon(t, a) * der.d_score[t];
      g.b_psi[a] += der.d_pre(t, a);
      const auto h = sample.tokens.row(t);
      for (std::size_t d = 0; d < dim; ++d) g.w_psi(a, d) += der.d_pre(t, a) * h[d];
    }
  }
}

std::vector<ForwardTrace> forward_batch(SampleRefs samples, const HeadParameters& params, ExecPolicy policy) {
  std::vector<ForwardTrace> traces(samples.size());
  const auto n = static_cast<std::int64_t>(samples.size());
  if (policy == ExecPolicy::kSerial) {
    for (std::int64_t i = 0; i < n; ++i) traces[i] = forward(*samples[i], params);
    return traces;
  }
  // Errors raised inside the parallel region are captured and rethrown.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      traces[i] = forward(*samples[i], params);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return traces;
}

Gradients backward_batch(SampleRefs samples, std::span<const ForwardTrace> traces, const LossBreakdown& loss,
                         const HeadParameters& p, const TrainConfig& config, ExecPolicy policy) {
  if (policy == ExecPolicy::kSerial) return backward(samples, traces, loss, p, config);

  require(samples.size() == traces.size() && loss.selected_coh.size() == samples.size() &&
              loss.selected_sep.size() == samples.size(),
          ErrorKind::kConsistency, "batch, traces and selections disagree in length");
  for (std::size_t i = 0; i < samples.size(); ++i) check_trace(traces[i], *samples[i], p);

  const auto batch = static_cast<std::int64_t>(samples.size());
  const double weight = 1.0 / static_cast<double>(samples.size());
  std::vector<SampleDerivatives> ders(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < batch; ++i) {
    ders[i] = sample_derivatives(*samples[i], traces[i], loss.selected_coh[i], loss.selected_sep[i], p, config, weight);
  }

  Gradients g = Gradients::zeros_like(p);
  const std::size_t classes = p.num_classes();
  const std::size_t dim = p.dim();
  const auto n_proto = static_cast<std::int64_t>(p.num_prototypes());
  const auto da = static_cast<std::int64_t>(p.attention_dim());

  // Row-parallel reductions; each coordinate sums samples in batch order,
  // matching accumulate_sample() called sample by sample.
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n_proto; ++j) {
    const auto pj = p.prototypes.row(j);
    for (std::int64_t i = 0; i < batch; ++i) {
      const auto& tr = traces[i];
      const auto& der = ders[i];
      for (std::size_t c = 0; c < classes; ++c) g.w_h(j, c) += tr.sim[j] * der.d_logits[c];
      for (std::size_t d = 0; d < dim; ++d) g.prototypes(j, d) += -2.0 * (tr.pooled[d] - pj[d]) * der.d_dist[j];
    }
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t a = 0; a < da; ++a) {
    for (std::int64_t i = 0; i < batch; ++i) {
      const auto& s = *samples[i];
      const auto& tr = traces[i];
      const auto& der = ders[i];
      for (std::size_t t = 0; t < s.num_tokens(); ++t) {
        g.w_nu[a] += tr.upsilon(t, a) * der.d_score[t];
        g.b_psi[a] += der.d_pre(t, a);
        const auto h = s.tokens.row(t);
        for (std::size_t d = 0; d < dim; ++d) g.w_psi(a, d) += der.d_pre(t, a) * h[d];
      }
    }
  }
  return g;
}

Matrix pooled_encodings(const Dataset& dataset, const HeadParameters& params, ExecPolicy policy) {
  Matrix out(dataset.size(), params.dim());
  const auto n = static_cast<std::int64_t>(dataset.size());
  auto one = [&](std::int64_t i) {
    const auto att = attend(dataset.samples[i].tokens, params);
    auto row = out.row(i);
    std::copy(att.pooled.begin(), att.pooled.end(), row.begin());
  };
  if (policy == ExecPolicy::kSerial) {
    for (std::int64_t i = 0; i < n; ++i) one(i);
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      one(i);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace protohead
