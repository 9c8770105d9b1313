#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "protohead/datastore.hpp"
#include "protohead/kernels.hpp"
#include "protohead/model.hpp"

namespace protohead {

struct ProjectedPrototype {
  std::size_t prototype = 0;
  std::size_t sample_index = 0;  // position in the training set
  std::uint64_t sample_id = 0;
  double dist_sq = 0.0;
  Vector alpha;                    // attention of the projected sample
  std::optional<std::string> text; // token-attended rendering, when texts exist
};

struct ProjectionResult {
  std::vector<ProjectedPrototype> prototypes;
};

/// Nearest same-class training encoding for every prototype; ties go to the
/// lowest sample_id.
ProjectionResult project_prototypes(const HeadParameters& params, const Dataset& train_set,
                                    ExecPolicy policy = ExecPolicy::kParallel);

/// Fraction of prototypes whose projected sample no other prototype shares.
double uniqueness(const ProjectionResult& projection);

/// Mean pairwise L2 distance over a seeded subsample (at most `max_samples`)
/// of pooled training encodings.
double encoding_distance_normalizer(const Matrix& encodings, std::uint64_t seed = 0, std::size_t max_samples = 1000,
                                    ExecPolicy policy = ExecPolicy::kParallel);

/// Mean over prototypes of |S_proj(j) - p_j| divided by the normalizer above.
double mean_normalized_projection_distance(const HeadParameters& params, const Dataset& train_set,
                                           const ProjectionResult& projection, std::uint64_t seed = 0,
                                           std::size_t max_samples = 1000,
                                           ExecPolicy policy = ExecPolicy::kParallel);

/// Normalized similarity for the two-prototype space view, 1 / (1 + |S - p|).
double normalized_similarity(double l2_distance);

struct SpaceRow {
  std::uint64_t sample_id = 0;
  double label = 0.0;       // class index, or regression target
  double prediction = 0.0;  // argmax class, or regression output
  double nsim_a = 0.0;
  double nsim_b = 0.0;
};

std::vector<SpaceRow> export_space(const HeadParameters& params, const Dataset& dataset, std::size_t proto_a,
                                   std::size_t proto_b, ExecPolicy policy = ExecPolicy::kParallel);

struct ClusterDistribution {
  std::size_t prototype = 0;
  std::vector<std::size_t> sample_indices;  // training-set positions covered by pi
  Vector distance;                          // plain L2 distance per covered sample
  Vector pi;                                // probabilities, summing to 1
};

/// Soft-clustering of one prototype over the training set: pi_i proportional
/// to 1 / d_i. Exact matches (d = 0) share all the mass uniformly.
ClusterDistribution cluster_distribution(const HeadParameters& params, const Dataset& train_set, std::size_t proto,
                                         bool class_restricted = false);
/// Same, from precomputed pooled encodings (rows aligned with the dataset).
ClusterDistribution cluster_distribution(const HeadParameters& params, const Dataset& train_set,
                                         const Matrix& encodings, std::size_t proto, bool class_restricted = false);

/// Renders tokens with their attention weights, e.g. "the[0.120] movie[0.400]".
std::string render_attended_text(const std::vector<std::string>& tokens, const Vector& alpha);

void write_projection_csv(std::ostream& os, const ProjectionResult& projection, const HeadParameters& params);
void write_space_csv(std::ostream& os, const std::vector<SpaceRow>& rows);
void write_distribution_csv(std::ostream& os, const ClusterDistribution& dist, const Dataset& train_set);

}  // namespace protohead
