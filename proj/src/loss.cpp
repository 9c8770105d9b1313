#include "protohead/loss.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "protohead/errors.hpp"
#include "protohead/kernels.hpp"

namespace protohead {

Gradients Gradients::zeros_like(const HeadParameters& p) {
  Gradients g;
  g.w_psi = Matrix(p.w_psi.rows(), p.w_psi.cols());
  g.b_psi.assign(p.b_psi.size(), 0.0);
  g.w_nu.assign(p.w_nu.size(), 0.0);
  g.prototypes = Matrix(p.prototypes.rows(), p.prototypes.cols());
  g.w_h = Matrix(p.w_h.rows(), p.w_h.cols());
  return g;
}

double loss_ce(std::span<const double> probs, std::uint32_t label) {
  require(label < probs.size(), ErrorKind::kIndex,
          "label " + std::to_string(label) + " >= class count " + std::to_string(probs.size()));
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

double loss_mse(double prediction, double target) {
  const double r = prediction - target;
  return r * r;
}

namespace {

// K extreme entries of `dist_sq` among prototypes passing `keep`, ordered by
// `before` with ties resolved towards the lower prototype index.
template <typename Keep, typename Before>
IndexSet select_k(std::span<const double> dist_sq, std::size_t k, Keep keep, Before before) {
  IndexSet pool;
  for (std::size_t j = 0; j < dist_sq.size(); ++j) {
    if (keep(j)) pool.push_back(j);
  }
  require(k <= pool.size(), ErrorKind::kConfig,
          "K = " + std::to_string(k) + " exceeds the " + std::to_string(pool.size()) + " eligible prototypes");
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (dist_sq[a] != dist_sq[b]) return before(dist_sq[a], dist_sq[b]);
                      return a < b;
                    });
  pool.resize(k);
  return pool;
}

double mean_at(std::span<const double> v, const IndexSet& idx) {
  double s = 0.0;
  for (auto j : idx) s += v[j];
  return s / static_cast<double>(idx.size());
}

}  // namespace

std::pair<double, IndexSet> loss_coh(std::span<const double> dist_sq, std::uint32_t label,
                                     std::span<const std::uint32_t> proto_class, std::size_t k) {
  require(dist_sq.size() == proto_class.size(), ErrorKind::kDimension, "dist_sq and proto_class lengths differ");
  require(k >= 1, ErrorKind::kConfig, "K must be >= 1");
  auto sel = select_k(dist_sq, k, [&](std::size_t j) { return proto_class[j] == label; }, std::greater<double>{});
  return {mean_at(dist_sq, sel), std::move(sel)};
}

std::pair<double, IndexSet> loss_sep(std::span<const double> dist_sq, std::uint32_t label,
                                     std::span<const std::uint32_t> proto_class, std::size_t k) {
  require(dist_sq.size() == proto_class.size(), ErrorKind::kDimension, "dist_sq and proto_class lengths differ");
  require(k >= 1, ErrorKind::kConfig, "K must be >= 1");
  const bool any_other =
      std::any_of(proto_class.begin(), proto_class.end(), [&](std::uint32_t c) { return c != label; });
  if (!any_other) return {0.0, {}};
  auto sel = select_k(dist_sq, k, [&](std::size_t j) { return proto_class[j] != label; }, std::less<double>{});
  return {-mean_at(dist_sq, sel), std::move(sel)};
}

void check_trace(const ForwardTrace& tr, const TokenEmbeddingSample& s, const HeadParameters& p) {
  const std::size_t t_count = s.num_tokens();
  const bool ok = tr.alpha.size() == t_count && tr.pooled.size() == p.dim() && tr.upsilon.rows() == t_count &&
                  tr.upsilon.cols() == p.attention_dim() && tr.dist_sq.size() == p.num_prototypes() &&
                  tr.sim.size() == p.num_prototypes() && tr.logits.size() == p.num_classes() &&
                  (p.mode == TaskMode::kRegression || tr.probs.size() == p.num_classes());
  require(ok, ErrorKind::kConsistency, "forward trace does not match sample/parameter shapes (stale trace)");
}

LossBreakdown total_loss(SampleRefs samples, std::span<const ForwardTrace> traces, const HeadParameters& params,
                         const TrainConfig& config) {
  validate_config(config);
  require(!samples.empty(), ErrorKind::kConfig, "empty batch");
  require(samples.size() == traces.size(), ErrorKind::kConsistency, "sample and trace counts differ");
  LossBreakdown out;
  out.selected_coh.reserve(samples.size());
  out.selected_sep.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = *samples[i];
    const auto& tr = traces[i];
    check_trace(tr, s, params);
    if (params.mode == TaskMode::kClassification) {
      out.ce += loss_ce(tr.probs, s.label);
    } else {
      out.ce += loss_mse(tr.logits[0], s.target);
    }
    const std::uint32_t cls = params.mode == TaskMode::kClassification ? s.label : 0;
    auto [coh, coh_sel] = loss_coh(tr.dist_sq, cls, params.proto_class, config.top_k);
    auto [sep, sep_sel] = loss_sep(tr.dist_sq, cls, params.proto_class, config.top_k);
    out.coh += coh;
    out.sep += sep;
    out.selected_coh.push_back(std::move(coh_sel));
    out.selected_sep.push_back(std::move(sep_sel));
  }
  const double b = static_cast<double>(samples.size());
  out.ce /= b;
  out.coh /= b;
  out.sep /= b;
  out.total = config.lambda0 * out.ce + config.lambda1 * out.coh + config.lambda2 * out.sep;
  return out;
}

LossBreakdown batch_objective(SampleRefs samples, const HeadParameters& params, const TrainConfig& config,
                              std::vector<ForwardTrace>* traces_out) {
  std::vector<ForwardTrace> traces;
  traces.reserve(samples.size());
  for (const auto* s : samples) traces.push_back(forward(*s, params));
  auto loss = total_loss(samples, traces, params, config);
  if (traces_out) *traces_out = std::move(traces);
  return loss;
}

Gradients backward(SampleRefs samples, std::span<const ForwardTrace> traces, const LossBreakdown& loss,
                   const HeadParameters& params, const TrainConfig& config) {
  require(samples.size() == traces.size() && loss.selected_coh.size() == samples.size() &&
              loss.selected_sep.size() == samples.size(),
          ErrorKind::kConsistency, "batch, traces and selections disagree in length");
  Gradients g = Gradients::zeros_like(params);
  const double weight = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check_trace(traces[i], *samples[i], params);
    const auto der = sample_derivatives(*samples[i], traces[i], loss.selected_coh[i], loss.selected_sep[i], params,
                                        config, weight);
    accumulate_sample(*samples[i], traces[i], der, params, g);
  }
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

namespace {

struct TensorRef {
  const char* name;
  std::span<double> (*param)(HeadParameters&);
  std::span<const double> (*grad)(const Gradients&);
};

const TensorRef kTensors[] = {
    {"w_psi", [](HeadParameters& p) { return p.w_psi.flat(); }, [](const Gradients& g) { return g.w_psi.flat(); }},
    {"b_psi", [](HeadParameters& p) { return std::span<double>(p.b_psi); },
     [](const Gradients& g) { return std::span<const double>(g.b_psi); }},
    {"w_nu", [](HeadParameters& p) { return std::span<double>(p.w_nu); },
     [](const Gradients& g) { return std::span<const double>(g.w_nu); }},
    {"prototypes", [](HeadParameters& p) { return p.prototypes.flat(); },
     [](const Gradients& g) { return g.prototypes.flat(); }},
    {"w_h", [](HeadParameters& p) { return p.w_h.flat(); }, [](const Gradients& g) { return g.w_h.flat(); }},
};

double central_difference(HeadParameters& p, std::span<double> values, std::size_t i, double h, SampleRefs samples,
                          const TrainConfig& config) {
  const double orig = values[i];
  values[i] = orig + h;
  const double plus = batch_objective(samples, p, config).total;
  values[i] = orig - h;
  const double minus = batch_objective(samples, p, config).total;
  values[i] = orig;
  return (plus - minus) / (2.0 * h);
}

}  // namespace

GradCheckReport grad_check(const HeadParameters& params, SampleRefs samples, const TrainConfig& config,
                           const Gradients& analytic, double step, double tolerance) {
  GradCheckReport report;
  report.step = step;
  report.tolerance = tolerance;
  HeadParameters p = params;
  bool shrinks = true;
  for (const auto& t : kTensors) {
    TensorCheck check;
    check.name = t.name;
    auto values = t.param(p);
    const auto grad = t.grad(analytic);
    require(grad.size() == values.size(), ErrorKind::kDimension, std::string("gradient shape mismatch for ") + t.name);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double numeric = central_difference(p, values, i, step, samples, config);
      const double err = relative_error(grad[i], numeric);
      if (err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
      }
    }
    if (check.max_rel_error >= tolerance) {
      const std::size_t i = check.worst_index;
      const double numeric_half = central_difference(p, values, i, step / 2.0, samples, config);
      check.max_rel_error_half_step = relative_error(grad[i], numeric_half);
      // Truncation error of a central difference falls ~4x per halving.
      shrinks = shrinks && check.max_rel_error_half_step < 0.5 * check.max_rel_error;
    } else {
      check.max_rel_error_half_step = check.max_rel_error;
    }
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error() < tolerance;
  report.truncation_dominated = !report.passed && shrinks;
  return report;
}

GradCheckReport grad_check(const HeadParameters& params, SampleRefs samples, const TrainConfig& config, double step,
                           double tolerance) {
  std::vector<ForwardTrace> traces;
  const auto loss = batch_objective(samples, params, config, &traces);
  const auto g = backward(samples, traces, loss, params, config);
  return grad_check(params, samples, config, g, step, tolerance);
}

}  // namespace protohead
