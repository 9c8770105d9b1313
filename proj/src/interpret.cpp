#include "protohead/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "protohead/errors.hpp"
#include "protohead/rng.hpp"

namespace protohead {

namespace {

std::uint32_t class_of(const TokenEmbeddingSample& s, TaskMode mode) {
  return mode == TaskMode::kClassification ? s.label : 0u;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ProjectionResult project_prototypes(const HeadParameters& params, const Dataset& train_set, ExecPolicy policy) {
  require(train_set.dim == params.dim(), ErrorKind::kDimension, "dataset D does not match model");
  const std::size_t n_proto = params.num_prototypes();
  std::vector<std::size_t> per_class(params.num_classes(), 0);
  for (const auto& s : train_set.samples) {
    const auto c = class_of(s, params.mode);
    if (c < per_class.size()) ++per_class[c];
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    require(per_class[c] > 0, ErrorKind::kProjection, "class " + std::to_string(c) + " has no training samples");
  }

  const Matrix enc = pooled_encodings(train_set, params, policy);
  ProjectionResult out;
  out.prototypes.resize(n_proto);
  const auto n = static_cast<std::int64_t>(n_proto);
  auto project_one = [&](std::int64_t j) {
    const auto cls = params.proto_class[j];
    const auto pj = params.prototypes.row(j);
    bool found = false;
    ProjectedPrototype best;
    best.prototype = static_cast<std::size_t>(j);
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      const auto& s = train_set.samples[i];
      if (class_of(s, params.mode) != cls) continue;
      const double d2 = l2_distance_sq(enc.row(i), pj);
      if (!found || d2 < best.dist_sq || (d2 == best.dist_sq && s.sample_id < best.sample_id)) {
        found = true;
        best.dist_sq = d2;
        best.sample_index = i;
        best.sample_id = s.sample_id;
      }
    }
    out.prototypes[j] = std::move(best);
  };
  if (policy == ExecPolicy::kSerial) {
    for (std::int64_t j = 0; j < n; ++j) project_one(j);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t j = 0; j < n; ++j) project_one(j);
  }

  for (auto& pp : out.prototypes) {
    const auto& s = train_set.samples[pp.sample_index];
    pp.alpha = attend(s.tokens, params).alpha;
    if (s.token_texts) pp.text = render_attended_text(*s.token_texts, pp.alpha);
  }
  return out;
}

double uniqueness(const ProjectionResult& projection) {
  if (projection.prototypes.empty()) return 0.0;
  std::map<std::uint64_t, std::size_t> claims;
  for (const auto& p : projection.prototypes) ++claims[p.sample_id];
  std::size_t unique = 0;
  for (const auto& p : projection.prototypes) {
    if (claims[p.sample_id] == 1) ++unique;
  }
  return static_cast<double>(unique) / static_cast<double>(projection.prototypes.size());
}

double encoding_distance_normalizer(const Matrix& encodings, std::uint64_t seed, std::size_t max_samples,
                                    ExecPolicy policy) {
  std::vector<std::size_t> rows(encodings.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > max_samples) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(max_samples);
    std::sort(rows.begin(), rows.end());
  }
  require(rows.size() >= 2, ErrorKind::kDiagnostic, "need at least two encodings for a distance normalizer");

  // Per-row partial sums, combined in row order.
  const auto m = static_cast<std::int64_t>(rows.size());
  Vector partial(rows.size(), 0.0);
  auto row_sum = [&](std::int64_t a) {
    double s = 0.0;
    for (std::size_t b = static_cast<std::size_t>(a) + 1; b < rows.size(); ++b) {
      s += std::sqrt(l2_distance_sq(encodings.row(rows[a]), encodings.row(rows[b])));
    }
    partial[a] = s;
  };
  if (policy == ExecPolicy::kSerial) {
    for (std::int64_t a = 0; a < m; ++a) row_sum(a);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t a = 0; a < m; ++a) row_sum(a);
  }
  double total = 0.0;
  for (double s : partial) total += s;
  const double pairs = static_cast<double>(rows.size()) * static_cast<double>(rows.size() - 1) / 2.0;
  const double mean = total / pairs;
  require(mean > 0.0, ErrorKind::kDiagnostic, "all training encodings coincide; normalizer is zero");
  return mean;
}

double mean_normalized_projection_distance(const HeadParameters& params, const Dataset& train_set,
                                           const ProjectionResult& projection, std::uint64_t seed,
                                           std::size_t max_samples, ExecPolicy policy) {
  require(projection.prototypes.size() == params.num_prototypes(), ErrorKind::kConsistency,
          "projection does not cover every prototype");
  const Matrix enc = pooled_encodings(train_set, params, policy);
  const double normalizer = encoding_distance_normalizer(enc, seed, max_samples, policy);
  double sum = 0.0;
  for (const auto& pp : projection.prototypes) {
    sum += std::sqrt(l2_distance_sq(enc.row(pp.sample_index), params.prototypes.row(pp.prototype)));
  }
  return sum / static_cast<double>(projection.prototypes.size()) / normalizer;
}

double normalized_similarity(double l2_distance) { return 1.0 / (1.0 + l2_distance); }

std::vector<SpaceRow> export_space(const HeadParameters& params, const Dataset& dataset, std::size_t proto_a,
                                   std::size_t proto_b, ExecPolicy policy) {
  const std::size_t n_proto = params.num_prototypes();
  require(proto_a < n_proto && proto_b < n_proto, ErrorKind::kIndex, "prototype index out of range");
  require(proto_a != proto_b, ErrorKind::kIndex, "export-space needs two distinct prototypes");
  std::vector<const TokenEmbeddingSample*> refs;
  for (const auto& s : dataset.samples) refs.push_back(&s);
  const auto traces = forward_batch(refs, params, policy);
  std::vector<SpaceRow> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[i];
    const auto& tr = traces[i];
    SpaceRow r;
    r.sample_id = s.sample_id;
    if (params.mode == TaskMode::kClassification) {
      r.label = s.label;
      r.prediction = static_cast<double>(argmax(tr.logits));
    } else {
      r.label = s.target;
      r.prediction = tr.logits[0];
    }
    r.nsim_a = normalized_similarity(std::sqrt(tr.dist_sq[proto_a]));
    r.nsim_b = normalized_similarity(std::sqrt(tr.dist_sq[proto_b]));
    rows.push_back(r);
  }
  return rows;
}

ClusterDistribution cluster_distribution(const HeadParameters& params, const Dataset& train_set,
                                         const Matrix& encodings, std::size_t proto, bool class_restricted) {
  require(proto < params.num_prototypes(), ErrorKind::kIndex, "prototype index out of range");
  require(encodings.rows() == train_set.size(), ErrorKind::kConsistency, "encodings do not match dataset");
  ClusterDistribution out;
  out.prototype = proto;
  const auto pj = params.prototypes.row(proto);
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (class_restricted && class_of(train_set.samples[i], params.mode) != params.proto_class[proto]) continue;
    out.sample_indices.push_back(i);
    out.distance.push_back(std::sqrt(l2_distance_sq(encodings.row(i), pj)));
  }
  require(!out.sample_indices.empty(), ErrorKind::kProjection, "no training samples for the distribution");

  const std::size_t zeros =
      static_cast<std::size_t>(std::count(out.distance.begin(), out.distance.end(), 0.0));
  out.pi.assign(out.distance.size(), 0.0);
  if (zeros > 0) {
    for (std::size_t i = 0; i < out.distance.size(); ++i) {
      if (out.distance[i] == 0.0) out.pi[i] = 1.0 / static_cast<double>(zeros);
    }
    return out;
  }
  double norm = 0.0;
  for (double d : out.distance) norm += 1.0 / d;
  const double eta = 1.0 / norm;
  for (std::size_t i = 0; i < out.distance.size(); ++i) out.pi[i] = eta / out.distance[i];
  return out;
}

ClusterDistribution cluster_distribution(const HeadParameters& params, const Dataset& train_set, std::size_t proto,
                                         bool class_restricted) {
  const Matrix enc = pooled_encodings(train_set, params, ExecPolicy::kParallel);
  return cluster_distribution(params, train_set, enc, proto, class_restricted);
}

std::string render_attended_text(const std::vector<std::string>& tokens, const Vector& alpha) {
  std::string out;
  char buf[32];
  for (std::size_t t = 0; t < tokens.size() && t < alpha.size(); ++t) {
    if (t) out += ' ';
    std::snprintf(buf, sizeof(buf), "[%.3f]", alpha[t]);
    out += tokens[t];
    out += buf;
  }
  return out;
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_projection_csv(std::ostream& os, const ProjectionResult& projection, const HeadParameters& params) {
  os << "# projection: nearest same-class pooled encoding by squared L2; ties to lowest sample_id\n";
  os << "prototype,class,sample_id,dist_sq,top_token,top_alpha,attended_text\n";
  for (const auto& pp : projection.prototypes) {
    const auto top = pp.alpha.empty() ? 0 : argmax(pp.alpha);
    os << pp.prototype << ',' << params.proto_class[pp.prototype] << ',' << pp.sample_id << ','
       << fmt_double(pp.dist_sq) << ',' << top << ',' << fmt_double(pp.alpha.empty() ? 0.0 : pp.alpha[top]) << ','
       << csv_quote(pp.text.value_or("")) << '\n';
  }
}

void write_space_csv(std::ostream& os, const std::vector<SpaceRow>& rows) {
  os << "# normalized similarity: nsim = 1/(1+d), d = L2 distance to the prototype\n";
  os << "sample_id,label,prediction,nsim_a,nsim_b\n";
  for (const auto& r : rows) {
    os << r.sample_id << ',' << fmt_double(r.label) << ',' << fmt_double(r.prediction) << ','
       << fmt_double(r.nsim_a) << ',' << fmt_double(r.nsim_b) << '\n';
  }
}

void write_distribution_csv(std::ostream& os, const ClusterDistribution& dist, const Dataset& train_set) {
  os << "# soft clustering: pi_i = eta / d_i (d = L2); zero distances share all mass uniformly\n";
  os << "prototype,sample_id,distance,pi\n";
  for (std::size_t k = 0; k < dist.sample_indices.size(); ++k) {
    os << dist.prototype << ',' << train_set.samples[dist.sample_indices[k]].sample_id << ','
       << fmt_double(dist.distance[k]) << ',' << fmt_double(dist.pi[k]) << '\n';
  }
}

}  // namespace protohead
